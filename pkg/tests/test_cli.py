import json
import shutil

import pytest

from gridpresence import pipeline
from gridpresence.cli import main
from gridpresence.config import dumps_config

from conftest import small_config


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(dumps_config(small_config()))
    return path


@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory, config_path):
    out = tmp_path_factory.mktemp("cliout") / "ds"
    code = main(["generate", "--config", str(config_path), "--out", str(out)])
    assert code == 0
    return out


def test_generate_writes_and_prints(cli_dataset, capsys):
    files = list(cli_dataset.iterdir())
    assert len(files) == 43


def test_generate_is_reproducible(cli_dataset, config_path, tmp_path):
    out2 = tmp_path / "again"
    assert main(["generate", "--config", str(config_path), "--out", str(out2)]) == 0
    assert (out2 / "digests.json").read_bytes() == (
        cli_dataset / "digests.json"
    ).read_bytes()


def test_generate_malformed_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"attack": {"target_attack_frac": 1.5}}))
    code = main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "target_attack_frac" in capsys.readouterr().err


def test_generate_unparseable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_generate_seed_override_changes_digests(config_path, tmp_path):
    out = tmp_path / "seeded"
    assert (
        main(
            ["generate", "--config", str(config_path), "--out", str(out), "--seed", "7"]
        )
        == 0
    )
    snapshot = json.loads((out / "config_effective.json").read_text())
    assert snapshot["seed_base"] == 7


def test_validate_fresh_dataset_exit_0(cli_dataset, tmp_path, capsys):
    report_dir = tmp_path / "report"
    assert main(["validate", "--in", str(cli_dataset), "--out", str(report_dir)]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out
    report = json.loads((report_dir / "validation_report.json").read_text())
    assert report["passed"] is True
    assert {a["name"] for a in report["audits"]} >= {
        "coverage", "strict_causality", "cross_split_independence",
    }
    quantiles = (report_dir / "shift_quantiles.csv").read_text().splitlines()
    assert quantiles[0] == "node,metric,class,q01,q25,q50,q75,q99"


def test_validate_truncated_file_exit_3(cli_dataset, tmp_path, capsys):
    broken = tmp_path / "broken"
    shutil.copytree(cli_dataset, broken)
    victim = broken / "node2_test.csv"
    victim.write_text(victim.read_text()[:-50])
    assert main(["validate", "--in", str(broken)]) == 3
    assert "node2_test.csv" in capsys.readouterr().err


def test_validate_missing_file_exit_3(cli_dataset, tmp_path, capsys):
    broken = tmp_path / "missing"
    shutil.copytree(cli_dataset, broken)
    (broken / "node0_train.csv").unlink()
    assert main(["validate", "--in", str(broken)]) == 3


def test_validate_corrupted_normalization_exit_1(cli_dataset, tmp_path):
    # semantic corruption with a consistent digest file: the leak audit, not
    # the structure check, must catch it
    broken = tmp_path / "leaky"
    shutil.copytree(cli_dataset, broken)
    norm_path = broken / "normalization.json"
    payload = json.loads(norm_path.read_text())
    for node, cols in payload["per_node"].items():
        for column, entry in cols.items():
            entry["mean"] = entry["mean"] + 1.0
    norm_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    digest_path = broken / "digests.json"
    digests = json.loads(digest_path.read_text())
    digests["files"]["normalization.json"] = pipeline.file_digest(norm_path)
    digest_path.write_text(json.dumps(digests, indent=2, sort_keys=True) + "\n")
    assert main(["validate", "--in", str(broken)]) == 1


def test_baseline_runs_and_writes_metrics(cli_dataset, tmp_path, capsys):
    out = tmp_path / "metrics"
    code = main(["baseline", "--in", str(cli_dataset), "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "macro:" in printed
    macro_csv = (out / "fed_macro_metrics.csv").read_text().strip().splitlines()
    assert macro_csv[0] == "Precision,Recall,F1,Accuracy"
    assert len(macro_csv) == 2
    client_csv = (out / "fed_client_metrics.csv").read_text().strip().splitlines()
    assert len(client_csv) == 11  # header + 10 clients


def test_baseline_without_train_split_exit_3(cli_dataset, tmp_path):
    broken = tmp_path / "no-train"
    shutil.copytree(cli_dataset, broken)
    for path in broken.glob("node*_train.csv"):
        path.unlink()
    assert main(["baseline", "--in", str(broken)]) == 3


def test_baseline_train_seed_determinism(cli_dataset, tmp_path, capsys):
    out1, out2 = tmp_path / "m1", tmp_path / "m2"
    assert main(["baseline", "--in", str(cli_dataset), "--out", str(out1),
                 "--train-seed", "3"]) == 0
    assert main(["baseline", "--in", str(cli_dataset), "--out", str(out2),
                 "--train-seed", "3"]) == 0
    assert (out1 / "fed_macro_metrics.csv").read_bytes() == (
        out2 / "fed_macro_metrics.csv"
    ).read_bytes()
