"""Presence-only attack windows: sampling, perturbation, labels, manifest.

A window perturbs only propagation latents (extra shadow loss plus a
coherence drop with inflated innovations) on a connected group of
eligible nodes, ramped in over the start of the labeled interval and
gated by per-epoch activity. Traffic and interference are never touched;
the adversary is receive-only.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .config import GeneratorConfig, MixtureParams
from .topology import Topology

logger = logging.getLogger(__name__)

SPLIT_ORDER = {"train": 0, "val": 1, "test": 2}

MANIFEST_COLUMNS = (
    "split",
    "window_id",
    "s0",
    "s1",
    "t0",
    "t1",
    "nodes",
    "group_size",
    "kdrop_db",
    "shadow_loss_db",
    "alpha_drop",
    "sigma_mult",
)


@dataclass(frozen=True)
class AttackWindow:
    split: str
    s0: int
    s1: int
    t0: int
    t1: int
    nodes: tuple[int, ...]
    shadow_loss_db: float
    kdrop_db: float
    alpha_drop: float
    sigma_mult: float
    ge_trace: np.ndarray  # binary, length s1 - s0
    reflect_on: bool

    @property
    def labeled_len(self) -> int:
        return self.s1 - self.s0


def ramp_profile(s0: int, s1: int, ramp_frac: float) -> np.ndarray:
    """Piecewise-linear ramp over [s0, s1): climb for the first
    max(1, round(ramp_frac * length)) epochs, then hold at 1."""
    if s1 <= s0:
        raise ValueError("window must have s1 > s0")
    if not 0.0 < ramp_frac <= 1.0:
        raise ValueError("ramp_frac must be in (0, 1]")
    length = s1 - s0
    l_ramp = max(1, int(math.floor(ramp_frac * length + 0.5)))
    t = np.arange(length, dtype=np.float64)
    return np.minimum((t + 1.0) / l_ramp, 1.0)


def sample_mixture(stream: np.random.Generator, mix: MixtureParams) -> float:
    """Truncated Gaussian mixture draw; one weighted mode pick, one normal."""
    idx = int(stream.choice(len(mix.modes), p=np.asarray(mix.weights)))
    value = stream.normal(mix.modes[idx], mix.sigmas[idx])
    return float(np.clip(value, mix.clip_lo, mix.clip_hi))


def sample_shadow_loss(stream: np.random.Generator, config: GeneratorConfig) -> float:
    return sample_mixture(stream, config.attack.shadow_mix)


def map_kdrop(
    kdrop_db: float,
    a0: float,
    a1: float,
    s0_coef: float,
    s1_coef: float,
    floor: float = 0.05,
) -> tuple[float, float]:
    """Map a coherence-drop magnitude (dB) to the correlation reduction
    factor and innovation multiplier; monotone in the magnitude."""
    if kdrop_db < 0:
        raise ValueError("kdrop_db must be >= 0")
    alpha_drop = 1.0 / (1.0 + a0 + a1 * kdrop_db)
    alpha_drop = min(1.0, max(floor, alpha_drop))
    sigma_mult = 1.0 + s0_coef + s1_coef * kdrop_db
    return alpha_drop, sigma_mult


def gilbert_elliott_sequence(
    length: int, p_gb: float, p_bg: float, stream: np.random.Generator
) -> np.ndarray:
    """Two-state excursion chain started in the good (0) state."""
    if not (0.0 <= p_gb <= 1.0 and 0.0 <= p_bg <= 1.0):
        raise ValueError("transition probabilities must be in [0, 1]")
    u = stream.random(length)
    out = np.empty(length, dtype=np.int64)
    state = 0
    for i in range(length):
        out[i] = state
        if state == 0:
            if u[i] < p_gb:
                state = 1
        elif u[i] < p_bg:
            state = 0
    return out


def sample_group(
    anchor: int,
    topology: Topology,
    k: int,
    stream: np.random.Generator,
    deficits: dict[int, int] | None = None,
) -> tuple[int, ...]:
    """Connected set of eligible nodes grown from the anchor.

    Breadth-first over eligible 1-hop neighbors with a randomized frontier,
    stopping at size ``k`` or when the frontier empties. When ``deficits``
    is given, expansion only recruits nodes that still need coverage, which
    keeps hub nodes from being dragged far past their quota by every
    neighbor's window.
    """
    nodes = topology.nodes
    if not nodes[anchor].eligible:
        raise ValueError(f"anchor {anchor} is not attack-eligible")

    def admissible(j: int) -> bool:
        if not nodes[j].eligible:
            return False
        return deficits is None or deficits.get(j, 0) > 0

    group = {anchor}
    frontier = sorted(j for j in topology.neighbors(anchor) if admissible(j))
    while len(group) < k and frontier:
        pick = frontier.pop(int(stream.integers(len(frontier))))
        group.add(pick)
        for j in topology.neighbors(pick):
            if j not in group and j not in frontier and admissible(j):
                frontier.append(j)
        frontier.sort()
    return tuple(sorted(group))


def sample_windows(
    split: str,
    split_len: int,
    topology: Topology,
    tx_counts: np.ndarray,
    config: GeneratorConfig,
    stream: np.random.Generator,
) -> list[AttackWindow]:
    """Place windows until every eligible node meets its coverage quota.

    ``tx_counts`` is the post-burn-in (N, split_len) count matrix. Anchors
    are drawn proportionally to the remaining deficit against the quota
    ceil(r * active_rows); placement stops once all deficits are cleared or
    the attempt budget runs out (logged by the caller, not fatal).
    """
    a = config.attack
    activity = tx_counts > 0
    eligible = topology.eligible_ids()
    quota = {
        i: int(math.ceil(a.target_attack_frac * int(activity[i].sum())))
        for i in eligible
    }
    cap = {i: int(math.floor(a.coverage_overshoot_factor * quota[i])) for i in eligible}
    labeled = np.zeros_like(activity, dtype=bool)
    spanned = np.zeros_like(activity, dtype=bool)
    used_keys: set[tuple[int, tuple[int, ...]]] = set()
    windows: list[AttackWindow] = []
    budget = a.placement_budget_factor * topology.n

    for _ in range(budget):
        deficits = {
            i: quota[i] - int((labeled[i] & activity[i]).sum()) for i in eligible
        }
        positive = [i for i in eligible if deficits[i] > 0]
        if not positive:
            break
        weights = np.array([deficits[i] for i in positive], dtype=np.float64)
        anchor = int(stream.choice(positive, p=weights / weights.sum()))
        k = int(stream.integers(a.group_min, a.group_max + 1))
        l_core = int(stream.integers(a.win_core_min, a.win_core_max + 1))
        l_lab = a.lead + l_core + a.tail + a.hyst
        if l_lab > split_len:
            continue
        s0 = int(stream.integers(0, split_len - l_lab + 1))
        s1 = s0 + l_lab
        group = sample_group(anchor, topology, k, stream, deficits)
        t0 = s0 + a.lead
        key = (t0, group)
        if key in used_keys:
            continue
        if not a.allow_overlap and spanned[list(group), s0:s1].any():
            continue
        overshoot = False
        for i in group:
            new = int((activity[i, s0:s1] & ~labeled[i, s0:s1]).sum())
            have = quota[i] - deficits[i]
            if have + new > cap[i]:
                overshoot = True
                break
        if overshoot:
            continue
        shadow_loss = sample_mixture(stream, a.shadow_mix)
        kdrop = sample_mixture(stream, a.kdrop_mix)
        alpha_drop, sigma_mult = map_kdrop(
            kdrop, a.alpha_a0, a.alpha_a1, a.sigma_s0, a.sigma_s1, a.alpha_drop_floor
        )
        ge = gilbert_elliott_sequence(l_lab, a.ge_p_gb, a.ge_p_bg, stream)
        reflect_on = bool(stream.random() < a.wifi_reflect_prob)
        windows.append(
            AttackWindow(
                split=split,
                s0=s0,
                s1=s1,
                t0=t0,
                t1=t0 + l_core,
                nodes=group,
                shadow_loss_db=shadow_loss,
                kdrop_db=kdrop,
                alpha_drop=alpha_drop,
                sigma_mult=sigma_mult,
                ge_trace=ge,
                reflect_on=reflect_on,
            )
        )
        used_keys.add(key)
        for i in group:
            labeled[i, s0:s1] = labeled[i, s0:s1] | activity[i, s0:s1]
            spanned[i, s0:s1] = True
    else:
        remaining = {
            i: quota[i] - int((labeled[i] & activity[i]).sum()) for i in eligible
        }
        short = {i: d for i, d in remaining.items() if d > 0}
        if short:
            logger.warning(
                "window placement budget (%d attempts) exhausted for split %s "
                "with open deficits %s",
                budget,
                split,
                short,
            )
    return windows


def build_labels(
    windows: list[AttackWindow], tx_counts: np.ndarray
) -> np.ndarray:
    """Activity-gated binary labels on the post-burn-in timeline."""
    labels = np.zeros(tx_counts.shape, dtype=np.int64)
    for w in windows:
        for i in w.nodes:
            labels[i, w.s0 : w.s1] |= tx_counts[i, w.s0 : w.s1] > 0
    return labels


def _rician_amplitude(
    k_db: float, size: int, stream: np.random.Generator
) -> np.ndarray:
    """Unit-RMS Rician amplitude draws with the given K-factor."""
    k_lin = 10.0 ** (k_db / 10.0)
    mu = math.sqrt(k_lin / (k_lin + 1.0))
    s = math.sqrt(1.0 / (2.0 * (k_lin + 1.0)))
    z = stream.standard_normal((size, 2))
    return np.abs(mu + s * (z[:, 0] + 1j * z[:, 1]))


def apply_attack(
    window: AttackWindow,
    h: np.ndarray,
    shadow_db: np.ndarray,
    innovations: np.ndarray,
    tx_counts: np.ndarray,
    burn_in: int,
    topology: Topology,
    config: GeneratorConfig,
    split_seed: int,
) -> None:
    """Blend one window's perturbations into the latent arrays in place.

    ``h``, ``shadow_db`` and ``innovations`` span burn-in plus the split;
    ``tx_counts`` is post-burn-in. Epochs outside the labeled interval and
    inactive epochs inside it are left bit-identical to the attack-free
    trace.
    """
    a = config.attack
    lo = burn_in + window.s0
    hi = burn_in + window.s1
    if lo < 0 or hi > h.shape[1]:
        raise ValueError("window extends outside the latent range")
    ramp = ramp_profile(window.s0, window.s1, a.ramp_frac)
    exponent = 1.0 + window.ge_trace
    for i in window.nodes:
        node = topology.nodes[i]
        gate = (tx_counts[i, window.s0 : window.s1] > 0).astype(np.float64)
        blend = ramp * gate
        shadow_db[i, lo:hi] -= window.shadow_loss_db * blend

        rho = config.channel.rho_by_tech[node.tech]
        rho_eff = rho * window.alpha_drop**exponent
        nu = window.sigma_mult**exponent
        reflect = None
        if node.tech == "WiFi" and window.reflect_on and a.wifi_reflect_rel_amp > 0:
            rs = rng.substream(
                "reflect", split_seed, window.t0, ",".join(map(str, window.nodes)), i
            )
            theta = rs.uniform(0.0, 2.0 * math.pi, window.labeled_len)
            amp = a.wifi_reflect_rel_amp * _rician_amplitude(
                a.wifi_reflect_k_db, window.labeled_len, rs
            )
            reflect = amp * np.exp(1j * theta)
        for offset in range(window.labeled_len):
            t = lo + offset
            if t == 0:
                continue  # recursion undefined before the first sample
            b = blend[offset]
            if b == 0.0:
                continue
            h_star = rho_eff[offset] * h[i, t - 1] + math.sqrt(
                max(0.0, 1.0 - rho_eff[offset] ** 2)
            ) * nu[offset] * innovations[i, t]
            if reflect is not None:
                h_star = h_star + reflect[offset]
            h[i, t] = (1.0 - b) * h[i, t] + b * h_star


def sort_windows(windows: list[AttackWindow]) -> list[AttackWindow]:
    return sorted(windows, key=lambda w: (SPLIT_ORDER[w.split], w.s0, w.nodes))


def render_manifest(windows: list[AttackWindow]) -> str:
    """Manifest CSV text: one row per window in deterministic order."""
    buf = io.StringIO()
    buf.write(",".join(MANIFEST_COLUMNS) + "\n")
    counters = {split: 0 for split in SPLIT_ORDER}
    for w in sort_windows(windows):
        wid = f"{w.split}_{counters[w.split]:04d}"
        counters[w.split] += 1
        row = (
            w.split,
            wid,
            str(w.s0),
            str(w.s1),
            str(w.t0),
            str(w.t1),
            ";".join(str(i) for i in w.nodes),
            str(len(w.nodes)),
            f"{w.kdrop_db:.9g}",
            f"{w.shadow_loss_db:.9g}",
            f"{w.alpha_drop:.9g}",
            f"{w.sigma_mult:.9g}",
        )
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_manifest(windows: list[AttackWindow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_manifest(windows))
