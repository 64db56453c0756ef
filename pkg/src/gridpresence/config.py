"""Generator configuration: every knob, its defaults, validation, and JSON I/O.

The effective config (defaults resolved) is re-exported verbatim next to
every dataset, and loading that export yields an identical config object
(round-trip fixpoint). Unknown keys are rejected so typos cannot silently
fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields

from . import rng, topology

SPLITS = rng.SPLITS

# Logistic PER midpoints (dB) per LoRa spreading factor, SF7..SF12.
LORA_SF_GAMMA50 = {7: -7.5, 8: -10.0, 9: -12.5, 10: -15.0, 11: -17.5, 12: -20.0}


class ConfigError(ValueError):
    """Raised when a config document fails to parse or violates an invariant."""


@dataclass(frozen=True)
class MixtureParams:
    """Truncated Gaussian mixture: pick a mode by weight, draw, clip."""

    modes: tuple[float, ...]
    weights: tuple[float, ...]
    sigmas: tuple[float, ...]
    clip_lo: float
    clip_hi: float


@dataclass(frozen=True)
class AttackParams:
    enabled: bool = True
    target_attack_frac: float = 0.08
    win_core_min: int = 30
    win_core_max: int = 120
    lead: int = 5
    tail: int = 5
    hyst: int = 5
    ramp_frac: float = 0.2
    group_min: int = 1
    group_max: int = 3
    allow_overlap: bool = True
    eligible_tech: tuple[str, ...] = topology.DEFAULT_ELIGIBLE_TECH
    shadow_mix: MixtureParams = MixtureParams(
        modes=(10.0, 15.0, 35.0, 55.0),
        weights=(0.35, 0.35, 0.20, 0.10),
        sigmas=(3.0, 3.0, 3.0, 3.0),
        clip_lo=0.5,
        clip_hi=67.0,
    )
    kdrop_mix: MixtureParams = MixtureParams(
        modes=(3.0, 6.0, 10.0),
        weights=(0.50, 0.35, 0.15),
        sigmas=(1.0, 1.0, 1.0),
        clip_lo=0.5,
        clip_hi=20.0,
    )
    # Coherence-drop mapping: alpha_drop = 1/(1 + a0 + a1*kdrop) floored,
    # sigma_mult = 1 + s0 + s1*kdrop.
    alpha_a0: float = 0.05
    alpha_a1: float = 0.01
    alpha_drop_floor: float = 0.05
    sigma_s0: float = 0.2
    sigma_s1: float = 0.03
    ge_p_gb: float = 0.05
    ge_p_bg: float = 0.25
    wifi_reflect_prob: float = 1.0
    wifi_reflect_k_db: float = 3.0
    wifi_reflect_rel_amp: float = 0.3
    # Window placement stops after budget_factor * n_nodes attempts.
    placement_budget_factor: int = 25
    # Reject placements that would push a member past this multiple of its
    # quota; keeps realized coverage inside the audited band.
    coverage_overshoot_factor: float = 1.25


@dataclass(frozen=True)
class TierShadowParams:
    scenario: str
    sigma_sf_db: float
    d_cor_m: float
    v_mps: float


@dataclass(frozen=True)
class PlcImpulseParams:
    p_enter: float = 0.02
    p_exit: float = 0.30
    stable_alpha: float = 1.5
    scale_db: float = 1.0
    clip_lo_db: float = 0.0
    clip_hi_db: float = 30.0


@dataclass(frozen=True)
class ChannelParams:
    rho_by_tech: dict[str, float] = field(
        default_factory=lambda: {
            "ZigBee": 0.95,
            "WiFi": 0.90,
            "LoRa": 0.98,
            "PLC": 0.90,
            "LTE": 0.93,
            "Fiber": 0.999,
        }
    )
    tier_shadow: dict[str, TierShadowParams] = field(
        default_factory=lambda: {
            "HAN": TierShadowParams("InH-NLOS", 8.03, 6.0, 0.239),
            "NAN": TierShadowParams("UMi-LOS", 4.0, 10.0, 0.50),
            "WAN": TierShadowParams("UMa-LOS", 4.0, 37.0, 0.30),
        }
    )
    # Variance shares of the shared-global / tier-layer / node-local
    # shadowing components; must sum to 1.
    share_global: float = 0.10
    share_layer: float = 0.20
    share_local: float = 0.70
    fiber_shadow_override: bool = False
    interf_scale_db_by_tech: dict[str, float] = field(
        default_factory=lambda: {
            "ZigBee": 2.0,
            "WiFi": 3.0,
            "LoRa": 1.5,
            "PLC": 3.0,
            "LTE": 2.0,
            "Fiber": 0.0,
        }
    )
    interf_rho: float = 0.9
    plc_impulse: PlcImpulseParams = PlcImpulseParams()


@dataclass(frozen=True)
class TechMeasurementParams:
    sigma_db: float
    clip_db: float
    quant_db: float


@dataclass(frozen=True)
class MeasurementParams:
    by_tech: dict[str, TechMeasurementParams] = field(
        default_factory=lambda: {
            "ZigBee": TechMeasurementParams(3.0, 6.0, 1.0),
            "WiFi": TechMeasurementParams(1.0, 3.0, 0.5),
            "LoRa": TechMeasurementParams(1.0, 3.0, 0.5),
            "PLC": TechMeasurementParams(1.0, 3.0, 0.5),
            "LTE": TechMeasurementParams(1.0, 3.0, 0.5),
            "Fiber": TechMeasurementParams(1.0, 3.0, 0.5),
        }
    )
    eps_min: float = 1e-6  # envelope floor before the dB map
    eps0: float = 1e-6  # amplitude output floor


@dataclass(frozen=True)
class TechLinkParams:
    gamma0_db: float
    margin_db: float
    k_per_db: float
    gamma50_db: float
    l0_ms: float


@dataclass(frozen=True)
class LinkParams:
    by_tech: dict[str, TechLinkParams] = field(
        default_factory=lambda: {
            "ZigBee": TechLinkParams(12.0, 2.0, 1.0, -2.0, 15.0),
            "WiFi": TechLinkParams(18.0, 3.0, 0.8, 4.0, 5.0),
            "LoRa": TechLinkParams(0.0, 3.0, 0.9, -12.5, 400.0),
            "PLC": TechLinkParams(15.0, 2.0, 0.9, 2.0, 20.0),
            "LTE": TechLinkParams(20.0, 3.0, 0.7, 6.0, 30.0),
            "Fiber": TechLinkParams(40.0, 0.0, 2.0, 0.0, 1.0),
        }
    )
    # LoRa spreading factor per node id; overrides gamma50 via LORA_SF_GAMMA50.
    lora_sf_by_node: dict[int, int] = field(default_factory=lambda: {4: 9, 5: 12})
    delta_node_sigma_db: float = 1.0
    delta_rtx_factor: float = 0.8  # reTX delay = factor * L0 per unit reTX
    jitter_factor: float = 0.05  # jitter std = factor * L0
    burst_p0: float = 0.005
    burst_slope: float = 0.1
    burst_scale_factor: float = 2.0  # shock magnitude scale = factor * L0
    burst_decay: float = 0.5
    latency_floor_factor: float = 0.1
    r_max: float = 10.0
    ewma_beta: float = 0.7
    per_eps: float = 1e-6


@dataclass(frozen=True)
class TrafficParams:
    meter_period: int = 15
    meter_extra_prob: float = 0.02
    gateway_child_periods: tuple[int, ...] = (15, 15, 15)
    gateway_poisson: float = 0.3
    der_mean_on: float = 10.0
    der_mean_off: float = 40.0
    der_on_poisson: float = 1.0
    relay_event_prob: float = 0.1
    polling_period: int = 5
    polling_poisson: float = 0.5
    pmu_dropout_prob: float = 0.005
    subgw_poisson: float = 0.8
    count_max: int = 20


@dataclass(frozen=True)
class FeatureParams:
    window: int = 32
    entropy_bins: int = 16
    base_observables: tuple[str, ...] = ("C_db", "SNR", "PER", "L_ewma")
    neighbor_observables: tuple[str, ...] = (
        "SNR",
        "PER",
        "L_ewma",
        "C_db",
        "phase_sin",
        "phase_cos",
        "dphase",
    )
    std_floor: float = 1e-8


@dataclass(frozen=True)
class FedParams:
    rounds: int = 30
    local_epochs: int = 2
    batch_size: int = 256
    learning_rate: float = 0.05
    threshold: float = 0.5
    train_seed: int = 0


@dataclass(frozen=True)
class ValidationParams:
    sigma_tol_frac: float = 0.10
    rho1_lo: float = 0.90
    rho1_hi: float = 1.0
    coverage_lo_factor: float = 0.8
    coverage_hi_factor: float = 1.3
    coverage_min_active: int = 500
    shift_min_rows: int = 100
    min_qualifying_rows: int = 1000
    standardized_mean_tol: float = 1e-9
    standardized_std_tol: float = 1e-6


@dataclass(frozen=True)
class GeneratorConfig:
    seed_base: int = 49
    dt_seconds: float = 1.0
    t_train: int = 20000
    t_val: int = 5000
    t_test: int = 5000
    burn_in: int = 500
    mixing_alpha: float = 0.30
    attack: AttackParams = AttackParams()
    channel: ChannelParams = ChannelParams()
    measurement: MeasurementParams = MeasurementParams()
    link: LinkParams = LinkParams()
    traffic: TrafficParams = TrafficParams()
    features: FeatureParams = FeatureParams()
    fed: FedParams = FedParams()
    validation: ValidationParams = ValidationParams()

    def t_split(self, split: str) -> int:
        return {"train": self.t_train, "val": self.t_val, "test": self.t_test}[split]


def derive_split_seed(config: GeneratorConfig, split: str) -> int:
    return rng.derive_split_seed(config.seed_base, split)


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

_INT_KEYED_DICTS = {"lora_sf_by_node"}


def _to_jsonable(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _to_jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    return value


def config_to_dict(config: GeneratorConfig) -> dict:
    return _to_jsonable(config)


def dumps_config(config: GeneratorConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def _coerce(value, ftype, path):
    origin = getattr(ftype, "__origin__", None)
    if dataclasses.is_dataclass(ftype):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected object, got {type(value).__name__}")
        return _from_dict(ftype, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected array")
        inner = ftype.__args__[0]
        return tuple(_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected object")
        key_t, val_t = ftype.__args__
        out = {}
        for k, v in value.items():
            if key_t is int:
                try:
                    key = int(k)
                except ValueError:
                    raise ConfigError(f"{path}.{k}: expected integer key") from None
            else:
                key = k
            out[key] = _coerce(v, val_t, f"{path}.{k}")
        return out
    if ftype is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        return value
    if ftype is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected boolean, got {value!r}")
        return value
    if ftype is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {ftype}")


def _from_dict(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        ftype = _resolve_type(cls, f)
        kwargs[name] = _coerce(data[name], ftype, f"{path}.{name}")
    return cls(**kwargs)


def _resolve_type(cls, f):
    # Fields are annotated with stringified hints (future annotations).
    import typing

    hints = typing.get_type_hints(cls)
    return hints[f.name]


def load_config_dict(data: dict) -> GeneratorConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    config = _from_dict(GeneratorConfig, data, "config")
    violations = validate_config(config)
    if violations:
        raise ConfigError("invalid config: " + "; ".join(violations))
    return config


def loads_config(text: str) -> GeneratorConfig:
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc
    return load_config_dict(data)


def load_config(path) -> GeneratorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_mixture(name: str, mix: MixtureParams, out: list[str]) -> None:
    n = len(mix.modes)
    if not (len(mix.weights) == len(mix.sigmas) == n) or n == 0:
        out.append(f"{name}: modes/weights/sigmas must be equal-length and nonempty")
        return
    if abs(sum(mix.weights) - 1.0) > 1e-9:
        out.append(f"{name}.weights: weights sum != 1")
    if any(w < 0 for w in mix.weights):
        out.append(f"{name}.weights: negative weight")
    if any(s < 0 for s in mix.sigmas):
        out.append(f"{name}.sigmas: negative sigma")
    if not mix.clip_lo < mix.clip_hi:
        out.append(f"{name}: clip range must have lo < hi")


def validate_config(config: GeneratorConfig) -> list[str]:
    """Return a list of invariant violations, each naming the offending field."""
    v: list[str] = []
    c = config
    if c.dt_seconds <= 0:
        v.append("dt_seconds: must be > 0")
    for name in ("t_train", "t_val", "t_test"):
        if getattr(c, name) < 1:
            v.append(f"{name}: must be >= 1")
    if c.burn_in < 0:
        v.append("burn_in: must be >= 0")
    if not 0.0 <= c.mixing_alpha <= 1.0:
        v.append("mixing_alpha: must be in [0, 1]")

    a = c.attack
    if not 0.0 < a.target_attack_frac < 1.0:
        v.append("attack.target_attack_frac: must be in (0, 1)")
    if not 1 <= a.win_core_min <= a.win_core_max:
        v.append("attack.win_core_min/win_core_max: need 1 <= min <= max")
    for name in ("lead", "tail", "hyst"):
        if getattr(a, name) < 0:
            v.append(f"attack.{name}: must be >= 0")
    if not 0.0 < a.ramp_frac <= 1.0:
        v.append("attack.ramp_frac: must be in (0, 1]")
    if a.group_min < 1:
        v.append("attack.group_min: must be >= 1")
    if a.group_max < a.group_min:
        v.append("attack.group_max: must be >= group_min")
    n_eligible = sum(
        1
        for _, _, _, tech in topology.DEFAULT_INVENTORY
        if tech in set(a.eligible_tech) - {"Fiber"}
    )
    if a.group_max > max(n_eligible, 1):
        v.append(
            f"attack.group_max: exceeds eligible node count ({n_eligible})"
        )
    unknown_tech = set(a.eligible_tech) - set(topology.TECHS)
    if unknown_tech:
        v.append(f"attack.eligible_tech: unknown technologies {sorted(unknown_tech)}")
    _check_mixture("attack.shadow_mix", a.shadow_mix, v)
    _check_mixture("attack.kdrop_mix", a.kdrop_mix, v)
    for name in ("alpha_a0", "alpha_a1", "sigma_s0", "sigma_s1"):
        if getattr(a, name) < 0:
            v.append(f"attack.{name}: must be >= 0")
    if not 0.0 < a.alpha_drop_floor <= 1.0:
        v.append("attack.alpha_drop_floor: must be in (0, 1]")
    for name in ("ge_p_gb", "ge_p_bg", "wifi_reflect_prob"):
        if not 0.0 <= getattr(a, name) <= 1.0:
            v.append(f"attack.{name}: must be in [0, 1]")
    if a.wifi_reflect_rel_amp < 0:
        v.append("attack.wifi_reflect_rel_amp: must be >= 0")
    if a.placement_budget_factor < 1:
        v.append("attack.placement_budget_factor: must be >= 1")
    if a.coverage_overshoot_factor < 1.0:
        v.append("attack.coverage_overshoot_factor: must be >= 1")

    ch = c.channel
    for tech in topology.TECHS:
        rho = ch.rho_by_tech.get(tech)
        if rho is None:
            v.append(f"channel.rho_by_tech.{tech}: missing")
        elif not 0.0 <= rho < 1.0:
            v.append(f"channel.rho_by_tech.{tech}: must be in [0, 1)")
    for tier in topology.TIERS:
        ts = ch.tier_shadow.get(tier)
        if ts is None:
            v.append(f"channel.tier_shadow.{tier}: missing")
            continue
        if ts.sigma_sf_db <= 0:
            v.append(f"channel.tier_shadow.{tier}.sigma_sf_db: must be > 0")
        if ts.d_cor_m <= 0:
            v.append(f"channel.tier_shadow.{tier}.d_cor_m: must be > 0")
        if ts.v_mps <= 0:
            v.append(f"channel.tier_shadow.{tier}.v_mps: must be > 0")
    shares = (ch.share_global, ch.share_layer, ch.share_local)
    if any(s < 0 for s in shares) or abs(sum(shares) - 1.0) > 1e-9:
        v.append("channel.share_global/share_layer/share_local: must be >= 0 and sum to 1")
    if not 0.0 <= ch.interf_rho < 1.0:
        v.append("channel.interf_rho: must be in [0, 1)")
    for tech in topology.TECHS:
        if tech not in ch.interf_scale_db_by_tech:
            v.append(f"channel.interf_scale_db_by_tech.{tech}: missing")
        elif ch.interf_scale_db_by_tech[tech] < 0:
            v.append(f"channel.interf_scale_db_by_tech.{tech}: must be >= 0")
    pi = ch.plc_impulse
    for name in ("p_enter", "p_exit"):
        if not 0.0 <= getattr(pi, name) <= 1.0:
            v.append(f"channel.plc_impulse.{name}: must be in [0, 1]")
    if not 0.0 < pi.stable_alpha <= 2.0:
        v.append("channel.plc_impulse.stable_alpha: must be in (0, 2]")
    if pi.scale_db <= 0:
        v.append("channel.plc_impulse.scale_db: must be > 0")
    if not pi.clip_lo_db < pi.clip_hi_db:
        v.append("channel.plc_impulse: clip range must have lo < hi")

    m = c.measurement
    for tech in topology.TECHS:
        tm = m.by_tech.get(tech)
        if tm is None:
            v.append(f"measurement.by_tech.{tech}: missing")
            continue
        if tm.sigma_db < 0:
            v.append(f"measurement.by_tech.{tech}.sigma_db: must be >= 0")
        if tm.clip_db <= 0:
            v.append(f"measurement.by_tech.{tech}.clip_db: must be > 0")
        if tm.quant_db <= 0:
            v.append(f"measurement.by_tech.{tech}.quant_db: must be > 0")
    if m.eps_min <= 0:
        v.append("measurement.eps_min: must be > 0")
    if m.eps0 <= 0:
        v.append("measurement.eps0: must be > 0")

    lk = c.link
    for tech in topology.TECHS:
        tl = lk.by_tech.get(tech)
        if tl is None:
            v.append(f"link.by_tech.{tech}: missing")
            continue
        if tl.k_per_db <= 0:
            v.append(f"link.by_tech.{tech}.k_per_db: must be > 0")
        if tl.l0_ms <= 0:
            v.append(f"link.by_tech.{tech}.l0_ms: must be > 0")
    for node_id, sf in lk.lora_sf_by_node.items():
        if sf not in LORA_SF_GAMMA50:
            v.append(f"link.lora_sf_by_node.{node_id}: unknown spreading factor {sf}")
    if lk.delta_rtx_factor <= 0:
        v.append("link.delta_rtx_factor: must be > 0")
    if lk.jitter_factor < 0:
        v.append("link.jitter_factor: must be >= 0")
    if not 0.0 <= lk.burst_decay < 1.0:
        v.append("link.burst_decay: must be in [0, 1)")
    if lk.r_max <= 0:
        v.append("link.r_max: must be > 0")
    if not 0.0 <= lk.ewma_beta < 1.0:
        v.append("link.ewma_beta: must be in [0, 1)")
    if not 0.0 < lk.per_eps < 0.5:
        v.append("link.per_eps: must be in (0, 0.5)")

    t = c.traffic
    if t.meter_period < 1 or t.polling_period < 1:
        v.append("traffic.meter_period/polling_period: must be >= 1")
    for name in ("meter_extra_prob", "relay_event_prob", "pmu_dropout_prob"):
        if not 0.0 <= getattr(t, name) <= 1.0:
            v.append(f"traffic.{name}: must be in [0, 1]")
    for name in ("gateway_poisson", "polling_poisson", "subgw_poisson", "der_on_poisson"):
        if getattr(t, name) < 0:
            v.append(f"traffic.{name}: must be >= 0")
    if t.der_mean_on < 1 or t.der_mean_off < 1:
        v.append("traffic.der_mean_on/der_mean_off: must be >= 1")
    if t.count_max < 1:
        v.append("traffic.count_max: must be >= 1")

    f = c.features
    if f.window < 2:
        v.append("features.window: must be >= 2")
    if f.entropy_bins < 2:
        v.append("features.entropy_bins: must be >= 2")
    if f.std_floor <= 0:
        v.append("features.std_floor: must be > 0")

    fd = c.fed
    if fd.rounds < 1 or fd.local_epochs < 1 or fd.batch_size < 1:
        v.append("fed.rounds/local_epochs/batch_size: must be >= 1")
    if fd.learning_rate <= 0:
        v.append("fed.learning_rate: must be > 0")
    if not 0.0 < fd.threshold < 1.0:
        v.append("fed.threshold: must be in (0, 1)")

    return v


def shadow_ar_coefficient(config: GeneratorConfig, tier: str) -> float:
    """Per-epoch AR coefficient implied by decorrelation distance and speed."""
    ts = config.channel.tier_shadow[tier]
    return math.exp(-ts.v_mps * config.dt_seconds / ts.d_cor_m)
