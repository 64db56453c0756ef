"""Strictly causal rolling descriptors, neighbor context, standardization.

Rolling statistics at epoch t use only samples from max(0, t-W+1)..t, so
randomizing any future sample leaves the value at t bit-identical. The
standardizer is fit on train rows only and applied unchanged to
validation/test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ROLL_STATS = (
    "roll_mean",
    "roll_std",
    "roll_skew",
    "roll_kurt",
    "roll_entropy",
    "roll_drift",
)

# Columns never standardized: indices, counts, labels, and the diagnostic
# latents that are blacklisted as learning inputs.
NON_FEATURE_COLUMNS = ("t", "tx_count", "attack_label", "shadow_db", "interf_db")

# Standardizer entries computed from exported columns at load time rather
# than stored in the CSVs themselves (C_db = 20*log10 C).
DERIVED_COLUMNS = ("C_db",)


def _window_stats(wins: np.ndarray, bins: int, std_floor: float) -> dict[str, np.ndarray]:
    """Stats per row of a (rows, width) window matrix."""
    width = wins.shape[1]
    mean = wins.mean(axis=1)
    centered = wins - mean[:, None]
    c2 = centered * centered
    m2 = c2.mean(axis=1)
    std = np.sqrt(m2)
    ok = std > std_floor
    m3 = (c2 * centered).mean(axis=1)
    m4 = (c2 * c2).mean(axis=1)
    skew = np.zeros_like(mean)
    kurt = np.zeros_like(mean)
    np.divide(m3, m2 * std, out=skew, where=ok)
    np.divide(m4, m2 * m2, out=kurt, where=ok)
    kurt = np.where(ok, kurt - 3.0, 0.0)

    lo = wins.min(axis=1)
    hi = wins.max(axis=1)
    span = hi - lo
    entropy = np.zeros_like(mean)
    valid = span > 0
    if np.any(valid) and width > 0:
        rows = np.flatnonzero(valid)
        rel = (wins[rows] - lo[rows, None]) / span[rows, None]
        idx = np.minimum((rel * bins).astype(np.int64), bins - 1)
        offsets = np.arange(rows.size)[:, None] * bins
        counts = np.bincount(
            (idx + offsets).ravel(), minlength=rows.size * bins
        ).reshape(rows.size, bins)
        p = counts / width
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(p), 0.0)
        entropy[rows] = -terms.sum(axis=1) / np.log(bins)

    if width > 1:
        tau = np.arange(width, dtype=np.float64)
        tau_c = tau - tau.mean()
        denom = float((tau_c**2).sum())
        drift = (wins @ tau_c) / denom
    else:
        drift = np.zeros_like(mean)

    return {
        "roll_mean": mean,
        "roll_std": std,
        "roll_skew": skew,
        "roll_kurt": kurt,
        "roll_entropy": entropy,
        "roll_drift": drift,
    }


def rolling_features(
    x: np.ndarray, window: int, bins: int, std_floor: float = 1e-8
) -> dict[str, np.ndarray]:
    """Causal rolling stats plus the one-step difference.

    Partial windows at the start use the available prefix.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 1:
        raise ValueError("sequence must be nonempty")
    out = {name: np.empty(n, dtype=np.float64) for name in ROLL_STATS}
    head = min(window - 1, n)
    for t in range(head):
        stats = _window_stats(x[: t + 1][None, :], bins, std_floor)
        for name in ROLL_STATS:
            out[name][t] = stats[name][0]
    if n >= window:
        stats = _window_stats(sliding_window_view(x, window), bins, std_floor)
        for name in ROLL_STATS:
            out[name][window - 1 :] = stats[name]
    delta = np.empty(n, dtype=np.float64)
    delta[0] = 0.0
    delta[1:] = np.diff(x)
    out["delta"] = delta
    return out


def activity_rate(activity: np.ndarray, window: int) -> np.ndarray:
    """Causal rolling mean of the activity gate."""
    a = np.asarray(activity, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(a)])
    t = np.arange(len(a))
    start = np.maximum(0, t - window + 1)
    return (csum[t + 1] - csum[start]) / (t + 1 - start)


def neighbor_features(
    mixing: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor aggregate W @ x and the absolute deviation from it.

    ``x`` is (N, T) for one observable across all nodes.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != mixing.shape[1]:
        raise ValueError("node dimension mismatch between mixing matrix and signal")
    avg = mixing @ x
    return avg, np.abs(x - avg)


@dataclass
class Standardizer:
    """Train-only per-(node, column) mean/std with a variance floor."""

    stats: dict[int, dict[str, tuple[float, float]]]
    std_floor: float = 1e-8

    def mean_std(self, node_id: int, column: str) -> tuple[float, float]:
        return self.stats[node_id][column]

    def transform_column(self, node_id: int, column: str, values) -> np.ndarray:
        mean, std = self.stats[node_id][column]
        return (np.asarray(values, dtype=np.float64) - mean) / std

    def to_json(self) -> str:
        payload = {
            "std_floor": self.std_floor,
            "per_node": {
                str(node): {col: {"mean": m, "std": s} for col, (m, s) in cols.items()}
                for node, cols in self.stats.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Standardizer":
        payload = json.loads(text)
        stats = {
            int(node): {
                col: (entry["mean"], entry["std"]) for col, entry in cols.items()
            }
            for node, cols in payload["per_node"].items()
        }
        return cls(stats=stats, std_floor=payload.get("std_floor", 1e-8))


def fit_standardizer(
    tables: dict[int, "pandas.DataFrame"], std_floor: float = 1e-8
) -> Standardizer:
    """Fit per-node statistics on train tables over every feature column."""
    stats: dict[int, dict[str, tuple[float, float]]] = {}
    for node_id, table in tables.items():
        if len(table) == 0:
            raise ValueError(f"empty train table for node {node_id}")
        cols = {}
        for column in table.columns:
            if column in NON_FEATURE_COLUMNS:
                continue
            values = table[column].to_numpy(dtype=np.float64)
            mean = float(values.mean())
            std = float(values.std(ddof=0))
            cols[column] = (mean, max(std, std_floor))
        stats[node_id] = cols
    return Standardizer(stats=stats, std_floor=std_floor)


def apply_standardizer(
    standardizer: Standardizer, node_id: int, table: "pandas.DataFrame"
) -> "pandas.DataFrame":
    """Standardize every fitted column of one node table; others pass through."""
    if node_id not in standardizer.stats:
        raise KeyError(f"standardizer has no entry for node {node_id}")
    out = table.copy()
    for column, (mean, std) in standardizer.stats[node_id].items():
        if column not in out.columns:
            if column in DERIVED_COLUMNS:
                continue
            raise KeyError(f"column {column!r} missing from table for node {node_id}")
        out[column] = (out[column].to_numpy(dtype=np.float64) - mean) / std
    return out
