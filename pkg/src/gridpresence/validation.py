"""Dataset audits: shadow statistics, coverage, shift, leak-safety.

Every audited quantity carries its sample size, and every gate records the
threshold it used. Audits are read-only over the dataset files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import features, rng
from .config import shadow_ar_coefficient
from .dataset_io import Dataset
from .topology import build_default_topology

SHIFT_METRICS = ("C_db", "SNR", "PER", "L_ewma")
SHIFT_QUANTILES = (0.01, 0.25, 0.50, 0.75, 0.99)


@dataclass
class AuditResult:
    name: str
    passed: bool
    details: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    shadow_stats: list[dict]
    coverage: list[dict]
    shift: list[dict]
    audits: list[AuditResult]

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.audits)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "shadow_stats": self.shadow_stats,
            "coverage": self.coverage,
            "shift": self.shift,
            "audits": [
                {"name": a.name, "passed": a.passed, "details": a.details}
                for a in self.audits
            ],
        }

    def shift_quantiles_csv(self) -> str:
        """Per-class quantile table for external plotting of the shift."""
        header = "node,metric,class,q01,q25,q50,q75,q99"
        lines = [header]
        for row in self.shift:
            if row.get("skipped"):
                continue
            for metric in SHIFT_METRICS:
                for cls in ("attack", "normal"):
                    quantiles = row[f"q_{cls}_{metric}"]
                    lines.append(
                        f"{row['node']},{metric},{cls},"
                        + ",".join(f"{q:.9g}" for q in quantiles)
                    )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = []
        lines.append("shadow statistics (non-attack active rows, train):")
        for row in self.shadow_stats:
            if row.get("skipped"):
                lines.append(f"  node {row['node']}: skipped ({row['skipped']})")
                continue
            lines.append(
                "  node {node} ({tier}): sigma_hat={sigma_hat:.2f} dB "
                "rho1_hat={rho1_hat:.3f} dcor_hat={dcor_hat:.2f} m n={n}".format(**row)
            )
        lines.append("coverage (per split, eligible nodes):")
        for row in self.coverage:
            lines.append(
                "  {split} node {node}: A={active} Y={labeled} r={coverage:.4f}".format(
                    **row
                )
            )
        lines.append("distribution shift (active rows, test):")
        for row in self.shift:
            if row.get("skipped"):
                lines.append(f"  node {row['node']}: skipped ({row['skipped']})")
                continue
            lines.append(
                "  node {node}: dSNR={delta_SNR:+.2f} dPER={delta_PER:+.4f} "
                "dC_db={delta_C_db:+.2f} dL_ewma={delta_L_ewma:+.2f} "
                "(n_attack={n_attack})".format(**row)
            )
        lines.append("audits:")
        for audit in self.audits:
            status = "PASS" if audit.passed else "FAIL"
            lines.append(f"  [{status}] {audit.name}")
            for detail in audit.details:
                lines.append(f"      {detail}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def estimate_shadow_stats(
    table: pd.DataFrame, v_tier: float, dt: float, min_rows: int = 1000
) -> tuple[float, float, float, int]:
    """(sigma_hat, rho1_hat, dcor_hat, n) on non-attack active rows.

    The lag-1 correlation uses only consecutive-epoch pairs where both rows
    qualify, so inactive or attacked epochs break runs instead of biasing
    the estimate toward zero.
    """
    mask = (table["attack_label"].to_numpy() == 0) & (
        table["tx_count"].to_numpy() > 0
    )
    values = table["shadow_db"].to_numpy(dtype=np.float64)
    n = int(mask.sum())
    if n < min_rows:
        raise ValueError(f"insufficient qualifying rows: {n} < {min_rows}")
    sigma_hat = float(values[mask].std(ddof=1))
    pair = mask[:-1] & mask[1:]
    x = values[:-1][pair]
    y = values[1:][pair]
    if len(x) < 2:
        raise ValueError("not enough consecutive qualifying pairs")
    rho1_hat = float(np.corrcoef(x, y)[0, 1])
    if 0.0 < rho1_hat < 1.0:
        dcor_hat = -v_tier * dt / math.log(rho1_hat)
    else:
        dcor_hat = float("nan")
    return sigma_hat, rho1_hat, dcor_hat, n


def coverage_audit(dataset: Dataset) -> list[dict]:
    """Exact (A_i, Y_i, r_i) per node per split; fiber labels must be zero."""
    nodes = dataset.nodes()
    rows = []
    for split in rng.SPLITS:
        for _, node in nodes.iterrows():
            table = dataset.node_table(int(node["id"]), split)
            active = int((table["tx_count"] > 0).sum())
            labeled = int((table["attack_label"] == 1).sum())
            rows.append(
                {
                    "split": split,
                    "node": int(node["id"]),
                    "eligible": bool(node["eligible"]),
                    "active": active,
                    "labeled": labeled,
                    "coverage": labeled / max(1, active),
                }
            )
    return rows


def shift_summary(dataset: Dataset, split: str = "test") -> list[dict]:
    """Attack-vs-normal deltas and quantiles on active rows."""
    rows = []
    for node_id in dataset.node_ids:
        table = dataset.node_table(node_id, split)
        active = table[table["tx_count"] > 0]
        attack = active[active["attack_label"] == 1]
        normal = active[active["attack_label"] == 0]
        if len(attack) == 0 or len(normal) == 0:
            rows.append({"node": node_id, "skipped": "one class absent"})
            continue
        entry = {"node": node_id, "n_attack": len(attack), "n_normal": len(normal)}
        for metric in SHIFT_METRICS:
            att = _metric_values(attack, metric)
            nor = _metric_values(normal, metric)
            entry[f"delta_{metric}"] = float(att.mean() - nor.mean())
            entry[f"q_attack_{metric}"] = [
                float(v) for v in np.quantile(att, SHIFT_QUANTILES)
            ]
            entry[f"q_normal_{metric}"] = [
                float(v) for v in np.quantile(nor, SHIFT_QUANTILES)
            ]
        rows.append(entry)
    return rows


def _metric_values(table: pd.DataFrame, metric: str) -> np.ndarray:
    if metric == "C_db":
        return 20.0 * np.log10(table["C"].to_numpy(dtype=np.float64))
    return table[metric].to_numpy(dtype=np.float64)


_column_values = _metric_values


def leak_and_causality_audit(dataset: Dataset) -> list[AuditResult]:
    """Three leak-safety checks: train-only normalization, strict causality
    of engineered columns, and cross-split latent independence."""
    config = dataset.config
    vp = config.validation
    standardizer = dataset.standardizer()
    results = []

    # 1. Standardizer is exactly the train statistics, and refitting on the
    # validation split gives something different.
    detail: list[str] = []
    ok = True
    refit_differs = False
    for node_id in dataset.node_ids:
        train = dataset.node_table(node_id, "train")
        val = dataset.node_table(node_id, "val")
        for column, (mean, std) in standardizer.stats[node_id].items():
            z = (_column_values(train, column) - mean) / std
            degenerate = std <= 10 * standardizer.std_floor
            if degenerate:
                continue
            if abs(z.mean()) >= vp.standardized_mean_tol:
                ok = False
                detail.append(
                    f"node {node_id} {column}: standardized train mean {z.mean():.3e}"
                )
            if abs(z.std(ddof=0) - 1.0) >= vp.standardized_std_tol:
                ok = False
                detail.append(
                    f"node {node_id} {column}: standardized train std {z.std(ddof=0):.6f}"
                )
            val_mean = float(_column_values(val, column).mean())
            if abs(val_mean - mean) > 1e-12:
                refit_differs = True
    if not refit_differs:
        ok = False
        detail.append("validation-split statistics identical to stored parameters")
    results.append(
        AuditResult(
            "train_only_normalization",
            ok,
            detail[:10] or [f"mean tol {vp.standardized_mean_tol}, std tol {vp.standardized_std_tol}"],
        )
    )

    # 2. Strict causality: recompute engineered columns after randomizing the
    # future half of each base observable; the prefix must be bit-identical.
    results.append(_causality_audit(dataset))

    # 3. Cross-split independence of the shadowing latent. The raw traces
    # are strongly autocorrelated, so the 3/sqrt(T) bound is applied to the
    # whitened one-step innovations, which are iid under the generator.
    detail = []
    ok = True
    t_val = config.t_val
    topo = build_default_topology(config.attack.eligible_tech)
    bound = 3.0 / math.sqrt(t_val - 1)
    for node in topo.nodes:
        train = dataset.node_table(node.id, "train")["shadow_db"].to_numpy()[:t_val]
        val = dataset.node_table(node.id, "val")["shadow_db"].to_numpy()[:t_val]
        if train.std() == 0 or val.std() == 0:
            continue  # fiber without override has no shadowing to compare
        rho_ar = shadow_ar_coefficient(config, node.tier)
        train_innov = train[1:] - rho_ar * train[:-1]
        val_innov = val[1:] - rho_ar * val[:-1]
        rho = float(np.corrcoef(train_innov, val_innov)[0, 1])
        if abs(rho) >= bound:
            ok = False
            detail.append(f"node {node.id}: cross-split innovation correlation {rho:.4f}")
    results.append(
        AuditResult(
            "cross_split_independence", ok, detail or [f"|rho| < {bound:.4f} for all nodes"]
        )
    )
    return results


def _causality_audit(dataset: Dataset) -> AuditResult:
    config = dataset.config
    fp = config.features
    detail: list[str] = []
    ok = True
    audit_stream = rng.substream("causality_audit", config.seed_base)
    for node_id in dataset.node_ids[:3]:  # three nodes suffice; columns are generic
        table = dataset.node_table(node_id, "train")
        t_cut = len(table) // 2
        for name in fp.base_observables:
            x = _metric_values(table, name)
            original = features.rolling_features(x, fp.window, fp.entropy_bins, fp.std_floor)
            perturbed_x = x.copy()
            perturbed_x[t_cut:] = audit_stream.normal(0.0, 1.0 + np.abs(x[t_cut:]))
            perturbed = features.rolling_features(
                perturbed_x, fp.window, fp.entropy_bins, fp.std_floor
            )
            for stat, values in original.items():
                if not np.array_equal(values[:t_cut], perturbed[stat][:t_cut]):
                    ok = False
                    detail.append(f"node {node_id} {name}_{stat}: prefix changed")
        gate = (table["tx_count"].to_numpy() > 0).astype(np.float64)
        rate = features.activity_rate(gate, fp.window)
        flipped = gate.copy()
        flipped[t_cut:] = 1.0 - flipped[t_cut:]
        rate_flipped = features.activity_rate(flipped, fp.window)
        if not np.array_equal(rate[:t_cut], rate_flipped[:t_cut]):
            ok = False
            detail.append(f"node {node_id} activity_rate: prefix changed")
    return AuditResult("strict_causality", ok, detail or ["prefix bit-identical"])


def run_validation(dataset: Dataset) -> ValidationReport:
    """Full audit battery with config-driven thresholds."""
    config = dataset.config
    vp = config.validation
    topo = build_default_topology(config.attack.eligible_tech)
    audits: list[AuditResult] = []

    shadow_rows = []
    detail: list[str] = []
    shadow_ok = True
    for node in topo.nodes:
        ts = config.channel.tier_shadow[node.tier]
        table = dataset.node_table(node.id, "train")
        if node.tech == "Fiber" and not config.channel.fiber_shadow_override:
            shadow_rows.append({"node": node.id, "skipped": "fiber shadow disabled"})
            continue
        try:
            sigma_hat, rho1_hat, dcor_hat, n = estimate_shadow_stats(
                table, ts.v_mps, config.dt_seconds, vp.min_qualifying_rows
            )
        except ValueError as exc:
            shadow_rows.append({"node": node.id, "skipped": str(exc)})
            continue
        shadow_rows.append(
            {
                "node": node.id,
                "tier": node.tier,
                "sigma_hat": sigma_hat,
                "rho1_hat": rho1_hat,
                "dcor_hat": dcor_hat,
                "n": n,
                "sigma_expected": ts.sigma_sf_db,
                "rho_expected": shadow_ar_coefficient(config, node.tier),
            }
        )
        if abs(sigma_hat - ts.sigma_sf_db) > vp.sigma_tol_frac * ts.sigma_sf_db:
            shadow_ok = False
            detail.append(
                f"node {node.id}: sigma_hat {sigma_hat:.2f} outside "
                f"{ts.sigma_sf_db}±{vp.sigma_tol_frac * ts.sigma_sf_db:.2f} dB"
            )
        if not vp.rho1_lo < rho1_hat < vp.rho1_hi:
            shadow_ok = False
            detail.append(
                f"node {node.id}: rho1_hat {rho1_hat:.3f} outside "
                f"({vp.rho1_lo}, {vp.rho1_hi})"
            )
    audits.append(
        AuditResult(
            "shadow_statistics",
            shadow_ok,
            detail or [f"sigma within ±{vp.sigma_tol_frac:.0%}, rho1 in ({vp.rho1_lo}, {vp.rho1_hi})"],
        )
    )

    coverage_rows = coverage_audit(dataset)
    detail = []
    coverage_ok = True
    r = config.attack.target_attack_frac
    for row in coverage_rows:
        if not row["eligible"]:
            if row["labeled"] != 0:
                coverage_ok = False
                detail.append(
                    f"{row['split']} node {row['node']}: ineligible but labeled "
                    f"{row['labeled']} rows"
                )
            continue
        if not config.attack.enabled:
            continue
        if row["active"] < vp.coverage_min_active:
            continue
        lo = vp.coverage_lo_factor * r
        hi = vp.coverage_hi_factor * r
        if not lo <= row["coverage"] <= hi:
            coverage_ok = False
            detail.append(
                f"{row['split']} node {row['node']}: coverage {row['coverage']:.4f} "
                f"outside [{lo:.4f}, {hi:.4f}]"
            )
    audits.append(
        AuditResult(
            "coverage",
            coverage_ok,
            detail
            or [
                f"r in [{vp.coverage_lo_factor}r, {vp.coverage_hi_factor}r] for "
                f"eligible nodes with A >= {vp.coverage_min_active}"
            ],
        )
    )

    label_ok = True
    detail = []
    for split in rng.SPLITS:
        for node_id in dataset.node_ids:
            table = dataset.node_table(node_id, split)
            silent = int(
                ((table["attack_label"] == 1) & (table["tx_count"] == 0)).sum()
            )
            if silent:
                label_ok = False
                detail.append(f"{split} node {node_id}: {silent} silent positives")
    audits.append(
        AuditResult("label_soundness", label_ok, detail or ["no silent positives"])
    )

    shift_rows = shift_summary(dataset)
    if config.attack.enabled:
        detail = []
        shift_ok = True
        for row in shift_rows:
            if row.get("skipped") or row["n_attack"] < vp.shift_min_rows:
                continue
            if row["delta_SNR"] >= 0:
                shift_ok = False
                detail.append(f"node {row['node']}: SNR shift {row['delta_SNR']:+.2f}")
            if row["delta_PER"] <= 0:
                shift_ok = False
                detail.append(f"node {row['node']}: PER shift {row['delta_PER']:+.4f}")
        audits.append(
            AuditResult(
                "distribution_shift",
                shift_ok,
                detail or [f"SNR down / PER up for nodes with >= {vp.shift_min_rows} attack rows"],
            )
        )

    audits.extend(leak_and_causality_audit(dataset))
    return ValidationReport(
        shadow_stats=shadow_rows, coverage=coverage_rows, shift=shift_rows, audits=audits
    )
