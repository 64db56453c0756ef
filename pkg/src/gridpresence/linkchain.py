"""Deterministic mapping from latents to exported link observables.

The chain is measured amplitude -> SNR -> packet error -> latency ->
smoothed latency. All randomness (measurement noise, jitter, burst
shocks) is injected through pre-drawn standard arrays so the mapping
itself is a pure function; re-deriving from the same latents and draws
reproduces every column bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ar1_filter
from .config import LORA_SF_GAMMA50, GeneratorConfig
from .topology import NodeSpec


@dataclass(frozen=True)
class NodeChainParams:
    """Fully resolved per-node constants for the observable chain."""

    sigma_meas_db: float
    clip_db: float
    quant_db: float
    eps_min: float
    eps0: float
    gamma0_db: float
    delta_node_db: float
    margin_db: float
    k_per_db: float
    gamma50_db: float
    per_eps: float
    r_max: float
    l0_ms: float
    delta_rtx_ms: float
    jitter_std_ms: float
    burst_p0: float
    burst_slope: float
    burst_scale_ms: float
    burst_decay: float
    latency_floor_ms: float
    ewma_beta: float


def resolve_chain_params(
    config: GeneratorConfig, node: NodeSpec, delta_node_db: float
) -> NodeChainParams:
    meas = config.measurement.by_tech[node.tech]
    link = config.link.by_tech[node.tech]
    gamma50 = link.gamma50_db
    if node.tech == "LoRa" and node.id in config.link.lora_sf_by_node:
        gamma50 = LORA_SF_GAMMA50[config.link.lora_sf_by_node[node.id]]
    lk = config.link
    return NodeChainParams(
        sigma_meas_db=meas.sigma_db,
        clip_db=meas.clip_db,
        quant_db=meas.quant_db,
        eps_min=config.measurement.eps_min,
        eps0=config.measurement.eps0,
        gamma0_db=link.gamma0_db,
        delta_node_db=delta_node_db,
        margin_db=link.margin_db,
        k_per_db=link.k_per_db,
        gamma50_db=gamma50,
        per_eps=lk.per_eps,
        r_max=lk.r_max,
        l0_ms=link.l0_ms,
        delta_rtx_ms=lk.delta_rtx_factor * link.l0_ms,
        jitter_std_ms=lk.jitter_factor * link.l0_ms,
        burst_p0=lk.burst_p0,
        burst_slope=lk.burst_slope,
        burst_scale_ms=lk.burst_scale_factor * link.l0_ms,
        burst_decay=lk.burst_decay,
        latency_floor_ms=lk.latency_floor_factor * link.l0_ms,
        ewma_beta=lk.ewma_beta,
    )


def quantize_db(u, q: float):
    """Uniform quantizer q*round(u/q) with half-away-from-zero ties.

    The tie rule is fixed so exports are bit-identical across
    implementations.
    """
    if q <= 0:
        raise ValueError("quantization step must be > 0")
    r = np.asarray(u, dtype=np.float64) / q
    return q * np.copysign(np.floor(np.abs(r) + 0.5), r)


def apply_measurement(
    envelope: np.ndarray, params: NodeChainParams, noise_z: np.ndarray
) -> np.ndarray:
    """Measured linear amplitude from the latent envelope.

    ``noise_z`` holds standard-normal draws; scaling by the per-node noise
    std happens here so paired runs can share draws.
    """
    h_db = 20.0 * np.log10(np.maximum(envelope, params.eps_min))
    err = np.clip(params.sigma_meas_db * noise_z, -params.clip_db, params.clip_db)
    measured_db = quantize_db(h_db + err, params.quant_db)
    return np.maximum(10.0 ** (measured_db / 20.0), params.eps0)


def measure_csi(
    envelope: np.ndarray, params: NodeChainParams, stream: np.random.Generator
) -> np.ndarray:
    return apply_measurement(envelope, params, stream.standard_normal(len(envelope)))


def compute_snr(
    c: np.ndarray, shadow_db: np.ndarray, interf_db: np.ndarray, params: NodeChainParams
) -> np.ndarray:
    """Link-budget SNR in dB."""
    return (
        params.gamma0_db
        + params.delta_node_db
        + 20.0 * np.log10(c)
        + params.margin_db
        + shadow_db
        - interf_db
    )


def compute_per(snr_db: np.ndarray, params: NodeChainParams) -> np.ndarray:
    """Logistic waterfall from SNR, clipped away from 0 and 1."""
    per = 1.0 / (1.0 + np.exp(params.k_per_db * (snr_db - params.gamma50_db)))
    return np.clip(per, params.per_eps, 1.0 - params.per_eps)


def retx_proxy(per, params: NodeChainParams):
    """Expected-retransmission proxy p/(1-p), capped at r_max."""
    p = np.minimum(per, 1.0 - params.per_eps)
    return np.minimum(params.r_max, p / (1.0 - p))


def deterministic_latency(per: np.ndarray, params: NodeChainParams) -> np.ndarray:
    """Baseline plus retransmission delay; the jitter/burst-free part of L."""
    return params.l0_ms + params.delta_rtx_ms * retx_proxy(per, params)


def apply_latency(
    per: np.ndarray,
    params: NodeChainParams,
    jitter_z: np.ndarray,
    burst_u: np.ndarray,
    burst_mag: np.ndarray,
) -> np.ndarray:
    """Latency in ms from packet error plus pre-drawn noise arrays.

    ``jitter_z`` are standard normals, ``burst_u`` uniforms in [0,1) and
    ``burst_mag`` standard exponentials. Burst occurrences use a fixed
    uniform-threshold comparison so that raising PER can only add
    occurrences, never remove them.
    """
    occur_p = np.minimum(1.0, params.burst_p0 + params.burst_slope * per)
    shocks = (burst_u < occur_p) * (params.burst_scale_ms * burst_mag)
    burst = ar1_filter(shocks, params.burst_decay)
    latency = (
        deterministic_latency(per, params)
        + params.jitter_std_ms * jitter_z
        + burst
    )
    return np.maximum(latency, params.latency_floor_ms)


def compute_latency(
    per: np.ndarray, params: NodeChainParams, stream: np.random.Generator
) -> np.ndarray:
    n = len(per)
    jitter_z = stream.standard_normal(n)
    burst_u = stream.random(n)
    burst_mag = stream.standard_exponential(n)
    return apply_latency(per, params, jitter_z, burst_u, burst_mag)


def ewma_latency(latency: np.ndarray, beta: float) -> np.ndarray:
    """Exponentially weighted smoothing seeded with the first sample."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    x = (1.0 - beta) * np.asarray(latency, dtype=np.float64)
    x[0] = latency[0]
    return ar1_filter(x, beta)


def derive_node_observables(
    envelope: np.ndarray,
    shadow_db: np.ndarray,
    interf_db: np.ndarray,
    params: NodeChainParams,
    noise_z: np.ndarray,
    jitter_z: np.ndarray,
    burst_u: np.ndarray,
    burst_mag: np.ndarray,
) -> dict[str, np.ndarray]:
    """Run the full chain for one node; pure given latents and draws."""
    c = apply_measurement(envelope, params, noise_z)
    snr = compute_snr(c, shadow_db, interf_db, params)
    per = compute_per(snr, params)
    latency = apply_latency(per, params, jitter_z, burst_u, burst_mag)
    smoothed = ewma_latency(latency, params.ewma_beta)
    return {"C": c, "SNR": snr, "PER": per, "L": latency, "L_ewma": smoothed}
