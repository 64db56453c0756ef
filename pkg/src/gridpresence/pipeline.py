"""End-to-end split generation and dataset export.

Per split: derive streams, generate traffic and latents over burn-in plus
the split length, sample and apply attack windows on the post-burn-in
timeline, re-derive every observable through the measurement chain, trim
burn-in, compute rolling and neighbor features, and (for train only) fit
the standardizer. Exports are written to a staging directory first so a
failed run never leaves a partial dataset behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import attacks, channel, features, linkchain, rng, traffic
from .config import (
    ConfigError,
    GeneratorConfig,
    config_to_dict,
    dumps_config,
    validate_config,
)
from .topology import Topology, build_default_topology

# Phase proxies carry extra digits so the unit-circle identity survives
# serialization on every exported row; everything else is 9 significant
# digits.
PHASE_FORMAT = "{:.12g}"
PHASE_COLUMNS = ("phase_sin", "phase_cos")

BASE_COLUMNS = (
    "t",
    "tx_count",
    "C",
    "phase_sin",
    "phase_cos",
    "dphase",
    "SNR",
    "PER",
    "L",
    "L_ewma",
    "shadow_db",
    "interf_db",
    "attack_label",
)

DIGEST_FILE = "digests.json"
CONFIG_FILE = "config_effective.json"
NORMALIZATION_FILE = "normalization.json"
MANIFEST_FILE = "attacks_windows_meta.csv"
TOPOLOGY_NODES_FILE = "topology_nodes.csv"
TOPOLOGY_EDGES_FILE = "topology_edges.csv"
ADJACENCY_FILE = "adjacency.txt"


@dataclass
class SplitState:
    """Everything generated for one split, pre-trim (burn-in included)."""

    split: str
    split_seed: int
    t_split: int
    burn_in: int
    tx_counts: np.ndarray  # (N, B+T) int
    h: np.ndarray  # (N, B+T) complex, post-attack
    innovations: np.ndarray  # (N, B+T) complex
    shadow_db: np.ndarray  # (N, B+T), post-attack
    interf_db: np.ndarray  # (N, B+T)
    noise: dict[str, np.ndarray]  # meas_z, jitter_z, burst_u, burst_mag
    chain_params: list[linkchain.NodeChainParams]
    windows: list[attacks.AttackWindow]
    labels: np.ndarray  # (N, T) int, post-burn-in
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def tx_post(self) -> np.ndarray:
        return self.tx_counts[:, self.burn_in :]


@dataclass
class SplitArtifact:
    split: str
    tables: dict[int, pd.DataFrame]
    windows: list[attacks.AttackWindow]
    standardizer: features.Standardizer | None


def node_delta_offsets(config: GeneratorConfig, topology: Topology) -> np.ndarray:
    """Per-node static calibration offsets, fixed per dataset (not per split)."""
    sigma = config.link.delta_node_sigma_db
    return np.array(
        [
            sigma * rng.substream("delta_node", config.seed_base, i).standard_normal()
            for i in range(topology.n)
        ]
    )


def generate_split_state(
    config: GeneratorConfig, topology: Topology, split: str
) -> SplitState:
    """Generate latents, attacks, and observables for one split."""
    split_seed = rng.derive_split_seed(config.seed_base, split)
    t_split = config.t_split(split)
    b = config.burn_in
    total = b + t_split
    n = topology.n

    tx = np.empty((n, total), dtype=np.int64)
    h = np.empty((n, total), dtype=np.complex128)
    innovations = np.empty((n, total), dtype=np.complex128)
    interf = np.empty((n, total), dtype=np.float64)
    for node in topology.nodes:
        tx[node.id] = traffic.generate_tx_counts(
            node, total, rng.substream("traffic", split_seed, node.id), config.traffic
        )
        rho = config.channel.rho_by_tech[node.tech]
        h[node.id], innovations[node.id] = channel.gen_fading_sequence(
            rho, total, rng.substream("fading", split_seed, node.id)
        )
        interf[node.id] = channel.gen_interference(
            node, total, rng.substream("interf", split_seed, node.id), config
        )
    shadow = channel.gen_shadowing_matrix(config, topology, split_seed, total)

    noise = {
        "meas_z": np.empty((n, total), dtype=np.float64),
        "jitter_z": np.empty((n, total), dtype=np.float64),
        "burst_u": np.empty((n, total), dtype=np.float64),
        "burst_mag": np.empty((n, total), dtype=np.float64),
    }
    for node in topology.nodes:
        noise["meas_z"][node.id] = rng.substream(
            "meas", split_seed, node.id
        ).standard_normal(total)
        jstream = rng.substream("jitter", split_seed, node.id)
        noise["jitter_z"][node.id] = jstream.standard_normal(total)
        bstream = rng.substream("burst", split_seed, node.id)
        noise["burst_u"][node.id] = bstream.random(total)
        noise["burst_mag"][node.id] = bstream.standard_exponential(total)

    windows: list[attacks.AttackWindow] = []
    if config.attack.enabled:
        windows = attacks.sample_windows(
            split,
            t_split,
            topology,
            tx[:, b:],
            config,
            rng.substream("attacks", split_seed),
        )
        for window in attacks.sort_windows(windows):
            attacks.apply_attack(
                window, h, shadow, innovations, tx[:, b:], b, topology, config, split_seed
            )
    labels = attacks.build_labels(windows, tx[:, b:])

    deltas = node_delta_offsets(config, topology)
    chain_params = [
        linkchain.resolve_chain_params(config, node, float(deltas[node.id]))
        for node in topology.nodes
    ]

    state = SplitState(
        split=split,
        split_seed=split_seed,
        t_split=t_split,
        burn_in=b,
        tx_counts=tx,
        h=h,
        innovations=innovations,
        shadow_db=shadow,
        interf_db=interf,
        noise=noise,
        chain_params=chain_params,
        windows=windows,
        labels=labels,
    )
    state.observables = derive_observables(state)
    return state


def derive_observables(state: SplitState) -> dict[str, np.ndarray]:
    """Run the measurement chain for every node over the full timeline."""
    n, total = state.tx_counts.shape
    out = {
        key: np.empty((n, total), dtype=np.float64)
        for key in ("C", "phase_sin", "phase_cos", "dphase", "SNR", "PER", "L", "L_ewma")
    }
    for i in range(n):
        params = state.chain_params[i]
        sin, cos, dphase = channel.phase_descriptors(state.h[i])
        out["phase_sin"][i] = sin
        out["phase_cos"][i] = cos
        out["dphase"][i] = dphase
        obs = linkchain.derive_node_observables(
            np.abs(state.h[i]),
            state.shadow_db[i],
            state.interf_db[i],
            params,
            state.noise["meas_z"][i],
            state.noise["jitter_z"][i],
            state.noise["burst_u"][i],
            state.noise["burst_mag"][i],
        )
        for key, values in obs.items():
            out[key][i] = values
    return out


def build_split_tables(
    config: GeneratorConfig, topology: Topology, state: SplitState
) -> dict[int, pd.DataFrame]:
    """Trim burn-in and assemble the per-node feature tables."""
    b = state.burn_in
    t_split = state.t_split
    fp = config.features
    obs_trimmed = {key: val[:, b:] for key, val in state.observables.items()}
    obs_trimmed["C_db"] = 20.0 * np.log10(obs_trimmed["C"])
    shadow = state.shadow_db[:, b:]
    interf = state.interf_db[:, b:]
    tx = state.tx_post

    mixing = _mixing_matrix(config, topology)
    neighbor = {}
    for name in fp.neighbor_observables:
        avg, dev = features.neighbor_features(mixing, obs_trimmed[name])
        neighbor[f"avg_neighbor_{name}"] = avg
        neighbor[f"dev_{name}"] = dev

    tables = {}
    epochs = np.arange(t_split, dtype=np.int64)
    for node in topology.nodes:
        i = node.id
        data: dict[str, np.ndarray] = {}
        data["t"] = epochs
        data["tx_count"] = tx[i]
        data["C"] = obs_trimmed["C"][i]
        data["phase_sin"] = obs_trimmed["phase_sin"][i]
        data["phase_cos"] = obs_trimmed["phase_cos"][i]
        data["dphase"] = obs_trimmed["dphase"][i]
        data["SNR"] = obs_trimmed["SNR"][i]
        data["PER"] = obs_trimmed["PER"][i]
        data["L"] = obs_trimmed["L"][i]
        data["L_ewma"] = obs_trimmed["L_ewma"][i]
        data["shadow_db"] = shadow[i]
        data["interf_db"] = interf[i]
        data["attack_label"] = state.labels[i]
        for name in fp.base_observables:
            rolled = features.rolling_features(
                obs_trimmed[name][i], fp.window, fp.entropy_bins, fp.std_floor
            )
            for stat, values in rolled.items():
                data[f"{name}_{stat}"] = values
        data["activity_rate"] = features.activity_rate(tx[i] > 0, fp.window)
        for name in fp.neighbor_observables:
            data[f"avg_neighbor_{name}"] = neighbor[f"avg_neighbor_{name}"][i]
            data[f"dev_{name}"] = neighbor[f"dev_{name}"][i]
        # Snap floats to their export precision now, so the in-memory
        # tables, the fitted standardizer, and the CSVs all agree exactly.
        for key, arr in data.items():
            if arr.dtype.kind == "f":
                fmt = PHASE_FORMAT if key in PHASE_COLUMNS else "{:.9g}"
                data[key] = np.array(
                    [float(fmt.format(v)) for v in arr.tolist()], dtype=np.float64
                )
        tables[i] = pd.DataFrame(data)
    return tables


def _mixing_matrix(config: GeneratorConfig, topology: Topology) -> np.ndarray:
    from .topology import compute_mixing

    return compute_mixing(topology, config.mixing_alpha)


def generate_split(
    config: GeneratorConfig, topology: Topology, split: str
) -> SplitArtifact:
    state = generate_split_state(config, topology, split)
    tables = build_split_tables(config, topology, state)
    standardizer = None
    if split == "train":
        standardizer = features.fit_standardizer(tables, config.features.std_floor)
        # C_db is derived from C at load time rather than exported; ship its
        # statistics so consumers can standardize it like any other column.
        for node_id, table in tables.items():
            c_db = 20.0 * np.log10(table["C"].to_numpy(dtype=np.float64))
            std = float(c_db.std(ddof=0))
            standardizer.stats[node_id]["C_db"] = (
                float(c_db.mean()),
                max(std, config.features.std_floor),
            )
    return SplitArtifact(
        split=split, tables=tables, windows=state.windows, standardizer=standardizer
    )


def node_csv_name(node_id: int, split: str) -> str:
    return f"node{node_id}_{split}.csv"


def render_node_csv(table: pd.DataFrame) -> str:
    """Serialize one node table: 9 significant digits, LF endings.

    Columns are formatted in bulk and joined manually; pandas' per-value
    float_format path is an order of magnitude slower.
    """
    columns: list[list[str]] = []
    for column in table.columns:
        values = table[column]
        if values.dtype.kind == "f":
            fmt = PHASE_FORMAT if column in PHASE_COLUMNS else "{:.9g}"
            columns.append([fmt.format(v) for v in values.to_numpy().tolist()])
        else:
            columns.append([str(v) for v in values.to_numpy().tolist()])
    header = ",".join(table.columns)
    body = "\n".join(",".join(row) for row in zip(*columns))
    return header + "\n" + body + "\n"


def render_topology_nodes(topology: Topology) -> str:
    lines = ["id,role,tier,tech,eligible"]
    for node in topology.nodes:
        lines.append(
            f"{node.id},{node.role},{node.tier},{node.tech},{int(node.eligible)}"
        )
    return "\n".join(lines) + "\n"


def render_topology_edges(topology: Topology) -> str:
    lines = ["u,v"]
    for i, j in topology.edges():
        lines.append(f"{i},{j}")
    return "\n".join(lines) + "\n"


def render_adjacency(topology: Topology) -> str:
    return (
        "\n".join(
            " ".join(str(int(v)) for v in row) for row in np.asarray(topology.adjacency)
        )
        + "\n"
    )


def file_digest(path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            sha.update(block)
    return sha.hexdigest()


def generate_dataset(config: GeneratorConfig, out_dir, threads: int = 1) -> dict[str, str]:
    """Generate all three splits and write the dataset atomically.

    Returns the mapping of file name to SHA-256 digest (the content of the
    digest file). ``out_dir`` is created if missing; on failure nothing is
    written to it. Splits are stream-independent, so ``threads`` > 1 runs
    them concurrently without changing a single exported byte.
    """
    violations = validate_config(config)
    if violations:
        raise ConfigError("invalid config: " + "; ".join(violations))
    topology = build_default_topology(config.attack.eligible_tech)
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(threads, len(rng.SPLITS))) as pool:
            artifacts = list(
                pool.map(lambda s: generate_split(config, topology, s), rng.SPLITS)
            )
    else:
        artifacts = [generate_split(config, topology, split) for split in rng.SPLITS]

    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir) or "."
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        for artifact in artifacts:
            for node_id, table in artifact.tables.items():
                name = node_csv_name(node_id, artifact.split)
                _write_text(os.path.join(staging, name), render_node_csv(table))
        all_windows = [w for a in artifacts for w in a.windows]
        _write_text(
            os.path.join(staging, MANIFEST_FILE), attacks.render_manifest(all_windows)
        )
        _write_text(
            os.path.join(staging, TOPOLOGY_NODES_FILE), render_topology_nodes(topology)
        )
        _write_text(
            os.path.join(staging, TOPOLOGY_EDGES_FILE), render_topology_edges(topology)
        )
        _write_text(os.path.join(staging, ADJACENCY_FILE), render_adjacency(topology))
        standardizer = artifacts[0].standardizer
        _write_text(
            os.path.join(staging, NORMALIZATION_FILE), standardizer.to_json()
        )
        _write_text(os.path.join(staging, CONFIG_FILE), dumps_config(config))

        digests = {
            name: file_digest(os.path.join(staging, name))
            for name in sorted(os.listdir(staging))
        }
        _write_text(
            os.path.join(staging, DIGEST_FILE),
            json.dumps({"algorithm": "sha256", "files": digests}, indent=2, sort_keys=True)
            + "\n",
        )

        if not os.path.exists(out_dir):
            os.rename(staging, out_dir)
        else:
            for name in sorted(os.listdir(staging)):
                os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
            shutil.rmtree(staging)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return digests


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def verify_digests(dataset_dir) -> list[str]:
    """Check every listed file's hash; return problems (empty if clean)."""
    digest_path = os.path.join(dataset_dir, DIGEST_FILE)
    if not os.path.exists(digest_path):
        return [f"missing {DIGEST_FILE}"]
    with open(digest_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    problems = []
    for name, expected in payload.get("files", {}).items():
        path = os.path.join(dataset_dir, name)
        if not os.path.exists(path):
            problems.append(f"missing file {name}")
        elif file_digest(path) != expected:
            problems.append(f"digest mismatch for {name}")
    return problems


def effective_config_dict(config: GeneratorConfig) -> dict:
    return config_to_dict(config)
