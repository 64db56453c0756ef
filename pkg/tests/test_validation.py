import numpy as np
import pandas as pd
import pytest

from gridpresence import rng
from gridpresence.channel import ar1_filter
from gridpresence.features import fit_standardizer
from gridpresence.validation import (
    coverage_audit,
    estimate_shadow_stats,
    leak_and_causality_audit,
    run_validation,
    shift_summary,
)


def _ar1_table(rho, n, seed, sigma=4.0):
    stream = rng.substream("val", seed)
    eps = stream.standard_normal(n)
    x = sigma * np.sqrt(1.0 - rho * rho) * eps
    x[0] = sigma * eps[0]
    series = ar1_filter(x, rho)
    return pd.DataFrame(
        {
            "shadow_db": series,
            "tx_count": np.ones(n, dtype=int),
            "attack_label": np.zeros(n, dtype=int),
        }
    )


def test_estimator_calibration_on_known_process():
    # known-process oracle: a pure AR(1) with rho = 0.9 fully qualifying
    table = _ar1_table(0.9, 100_000, 0)
    sigma, rho1, dcor, n = estimate_shadow_stats(table, v_tier=0.5, dt=1.0)
    assert n == 100_000
    assert rho1 == pytest.approx(0.9, abs=0.01)
    assert sigma == pytest.approx(4.0, rel=0.05)
    # inversion consistency: dcor = -v dt / ln(rho1)
    assert dcor == pytest.approx(-0.5 / np.log(rho1), abs=1e-9)


def test_estimator_breaks_runs_at_excluded_epochs():
    # excluded epochs break pairs instead of biasing rho toward zero:
    # deactivate every second epoch so no consecutive pairs survive
    table = _ar1_table(0.9, 4000, 1)
    table.loc[1::2, "tx_count"] = 0
    with pytest.raises(ValueError, match="pairs"):
        estimate_shadow_stats(table, v_tier=0.5, dt=1.0, min_rows=1000)


def test_estimator_requires_enough_rows():
    table = _ar1_table(0.9, 500, 2)
    with pytest.raises(ValueError, match="insufficient"):
        estimate_shadow_stats(table, v_tier=0.5, dt=1.0)


def test_shadow_stats_on_real_dataset(small_dataset):
    # plenty of qualifying rows on the always-on controller
    table = small_dataset.node_table(7, "train")
    sigma, rho1, dcor, n = estimate_shadow_stats(
        table, v_tier=0.5, dt=1.0, min_rows=500
    )
    assert n >= 500
    assert 0.9 < rho1 < 1.0
    assert sigma == pytest.approx(4.0, abs=0.8)


def test_coverage_audit_counts(small_dataset):
    rows = coverage_audit(small_dataset)
    assert len(rows) == 36  # 12 nodes x 3 splits
    by_key = {(r["split"], r["node"]): r for r in rows}
    for split in rng.SPLITS:
        for fiber in (8, 9):
            assert by_key[(split, fiber)]["labeled"] == 0
            assert not by_key[(split, fiber)]["eligible"]
    train0 = by_key[("train", 0)]
    table = small_dataset.node_table(0, "train")
    assert train0["active"] == int((table["tx_count"] > 0).sum())
    assert train0["labeled"] == int(table["attack_label"].sum())
    assert train0["coverage"] == train0["labeled"] / max(1, train0["active"])


def test_coverage_zero_active_guard():
    class StubDataset:
        node_ids = [0]

        def nodes(self):
            return pd.DataFrame(
                [{"id": 0, "role": "SmartMeter", "tier": "HAN",
                  "tech": "ZigBee", "eligible": True}]
            )

        def node_table(self, node_id, split):
            return pd.DataFrame(
                {"tx_count": np.zeros(10, dtype=int),
                 "attack_label": np.zeros(10, dtype=int)}
            )

    rows = coverage_audit(StubDataset())
    assert all(r["coverage"] == 0.0 for r in rows)
    assert all(r["active"] == 0 for r in rows)


def test_shift_summary_structure(small_dataset):
    rows = shift_summary(small_dataset, "test")
    by_node = {r["node"]: r for r in rows}
    assert by_node[8].get("skipped")  # fiber: no attack class
    attacked = [r for r in rows if not r.get("skipped")]
    assert attacked
    for row in attacked:
        assert set(k for k in row if k.startswith("delta_")) == {
            "delta_C_db", "delta_SNR", "delta_PER", "delta_L_ewma",
        }
        assert len(row["q_attack_SNR"]) == 5
        assert len(row["q_normal_SNR"]) == 5


def test_leak_audit_passes_on_real_dataset(small_dataset):
    results = leak_and_causality_audit(small_dataset)
    assert all(r.passed for r in results), [
        (r.name, r.details) for r in results if not r.passed
    ]


def test_leak_audit_negative_control_val_fit(small_dataset):
    # a standardizer refit on the validation split must fail the audit
    tables = {
        node_id: small_dataset.node_table(node_id, "val")
        for node_id in small_dataset.node_ids
    }
    corrupted = fit_standardizer(tables, small_dataset.config.features.std_floor)
    for node_id, table in tables.items():
        c_db = 20.0 * np.log10(table["C"].to_numpy())
        corrupted.stats[node_id]["C_db"] = (float(c_db.mean()), float(c_db.std()))

    class CorruptedView(type(small_dataset)):
        def standardizer(self):
            return corrupted

    view = CorruptedView(
        path=small_dataset.path,
        config=small_dataset.config,
        node_ids=small_dataset.node_ids,
    )
    results = {r.name: r for r in leak_and_causality_audit(view)}
    assert not results["train_only_normalization"].passed


def test_run_validation_full_report(small_dataset):
    report = run_validation(small_dataset)
    assert report.passed, report.to_text()
    text = report.to_text()
    assert "overall: PASS" in text
    assert "coverage" in text
    names = [a.name for a in report.audits]
    assert names == [
        "shadow_statistics",
        "coverage",
        "label_soundness",
        "distribution_shift",
        "train_only_normalization",
        "strict_causality",
        "cross_split_independence",
    ]
    # every audited quantity carries its sample size
    for row in report.shadow_stats:
        assert "n" in row or row.get("skipped")
    for row in report.shift:
        assert "n_attack" in row or row.get("skipped")
