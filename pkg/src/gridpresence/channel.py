"""Split-local latent propagation processes.

Three independent latents per node: a complex first-order Gauss-Markov
fading process (exported only through amplitude/phase proxies), a
composite shadowing process in dB built from shared global, tier-level,
and node-local innovations, and a technology-conditioned interference
process in dB with impulsive bursts on PLC links.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter

from . import rng
from .config import GeneratorConfig, shadow_ar_coefficient
from .topology import Topology


def ar1_filter(x: np.ndarray, rho: float) -> np.ndarray:
    """y[0] = x[0]; y[t] = rho*y[t-1] + x[t], evaluated in C."""
    return lfilter([1.0], [1.0, -rho], x)


def gen_fading_sequence(
    rho: float, length: int, stream: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Complex AR(1) fading with stationary unit power.

    Returns ``(h, w)`` where ``w`` holds the unit complex Gaussian
    innovations (w[0] is unused; the start value is a stationary draw).
    The innovations are kept so attack perturbations can rebuild the
    recursion with modified coefficients from the same draws.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    z0 = stream.standard_normal(2)
    z = stream.standard_normal((length, 2))
    w = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)
    w[0] = 0.0
    x = math.sqrt(1.0 - rho * rho) * w
    x[0] = (z0[0] + 1j * z0[1]) / math.sqrt(2.0)
    h = ar1_filter(x, rho)
    return h, w


def phase_descriptors(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Label-safe phase proxies: sin, cos, and unwrapped first difference."""
    h = np.asarray(h)
    if h.size == 0:
        raise ValueError("empty fading sequence")
    phi = np.angle(h)
    unwrapped = np.unwrap(phi)
    dphase = np.empty_like(unwrapped)
    dphase[0] = 0.0
    dphase[1:] = np.diff(unwrapped)
    return np.sin(phi), np.cos(phi), dphase


def gen_shadowing_matrix(
    config: GeneratorConfig, topology: Topology, split_seed: int, length: int
) -> np.ndarray:
    """Composite shadowing in dB for every node, shape (N, length).

    Each node follows an AR(1) recursion at its tier's coefficient with
    stationary std sigma_SF. Innovations are a convex-in-variance mix of a
    global stream (shared by all nodes), a tier stream, and a node-local
    stream, so co-located nodes co-move without distorting the per-node
    marginal statistics.
    """
    ch = config.channel
    c_g = math.sqrt(ch.share_global)
    c_l = math.sqrt(ch.share_layer)
    c_n = math.sqrt(ch.share_local)
    eps_global = rng.substream("shadow_global", split_seed).standard_normal(length)
    eps_layer = {
        tier: rng.substream("shadow_layer", split_seed, tier).standard_normal(length)
        for tier in ("HAN", "NAN", "WAN")
    }
    out = np.zeros((topology.n, length), dtype=np.float64)
    for node in topology.nodes:
        if node.tech == "Fiber" and not ch.fiber_shadow_override:
            continue
        eps_local = rng.substream("shadow_local", split_seed, node.id).standard_normal(
            length
        )
        eps = c_g * eps_global + c_l * eps_layer[node.tier] + c_n * eps_local
        sigma = ch.tier_shadow[node.tier].sigma_sf_db
        rho = shadow_ar_coefficient(config, node.tier)
        x = sigma * math.sqrt(1.0 - rho * rho) * eps
        x[0] = sigma * eps[0]
        out[node.id] = ar1_filter(x, rho)
    return out


def sample_stable_magnitude(
    alpha: float, size: int, stream: np.random.Generator
) -> np.ndarray:
    """|X| for symmetric alpha-stable X with unit scale (CMS construction)."""
    v = stream.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = stream.standard_exponential(size)
    if alpha == 1.0:
        return np.abs(np.tan(v))
    x = (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha)
    )
    return np.abs(x)


def gen_interference(
    node, length: int, stream: np.random.Generator, config: GeneratorConfig
) -> np.ndarray:
    """Nonnegative interference in dB; PLC adds gated heavy-tailed impulses."""
    ch = config.channel
    scale = ch.interf_scale_db_by_tech[node.tech]
    if scale == 0.0 and node.tech != "PLC":
        return np.zeros(length, dtype=np.float64)
    eps = stream.standard_normal(length)
    rho = ch.interf_rho
    x = math.sqrt(1.0 - rho * rho) * eps
    x[0] = eps[0]
    background = scale * np.abs(ar1_filter(x, rho))
    if node.tech != "PLC":
        return background
    pi = ch.plc_impulse
    gate_u = stream.random(length)
    gate = np.empty(length, dtype=np.int64)
    state = 0
    for i in range(length):
        gate[i] = state
        if state == 0:
            if gate_u[i] < pi.p_enter:
                state = 1
        elif gate_u[i] < pi.p_exit:
            state = 0
    magnitudes = pi.scale_db * sample_stable_magnitude(pi.stable_alpha, length, stream)
    impulses = gate * np.clip(magnitudes, pi.clip_lo_db, pi.clip_hi_db)
    return np.maximum(background + impulses, 0.0)
