"""Role-conditioned transmission-count series and the activity gate.

Counts are integers per epoch (possibly zero). Each role has its own
qualitative shape: periodic metering, polling supervisors, near-continuous
PMU telemetry, bursty DER activity, and background gateway chatter.
"""

from __future__ import annotations

import numpy as np

from .config import TrafficParams
from .topology import NodeSpec


def generate_tx_counts(
    node: NodeSpec, length: int, stream: np.random.Generator, params: TrafficParams
) -> np.ndarray:
    """Draw a count series of ``length`` epochs for one node.

    Deterministic for a fixed stream; draw order per role is part of the
    reproducibility contract and must not be reordered.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    t = np.arange(length)
    p = params
    role = node.role
    if role == "SmartMeter":
        phase = int(stream.integers(p.meter_period))
        counts = (t % p.meter_period == phase).astype(np.int64)
        counts += stream.random(length) < p.meter_extra_prob
    elif role == "Gateway":
        counts = np.zeros(length, dtype=np.int64)
        for period in p.gateway_child_periods:
            phase = int(stream.integers(period))
            counts += t % period == phase
        counts += stream.poisson(p.gateway_poisson, length)
    elif role == "DER":
        on = _on_off_chain(length, 1.0 / p.der_mean_on, 1.0 / p.der_mean_off, stream)
        counts = on * stream.poisson(p.der_on_poisson, length)
    elif role == "FeederRelay":
        counts = (stream.random(length) < p.relay_event_prob).astype(np.int64)
    elif role in ("Controller", "SCADA", "AMIHeadend"):
        phase = int(stream.integers(p.polling_period))
        counts = (t % p.polling_period == phase).astype(np.int64)
        counts += stream.poisson(p.polling_poisson, length)
    elif role == "PMU":
        counts = np.ones(length, dtype=np.int64)
        counts[stream.random(length) < p.pmu_dropout_prob] = 0
    elif role == "SubstationGW":
        counts = stream.poisson(p.subgw_poisson, length)
    else:
        raise ValueError(f"unknown role {role!r}")
    return np.minimum(counts.astype(np.int64), p.count_max)


def _on_off_chain(
    length: int, p_off: float, p_on: float, stream: np.random.Generator
) -> np.ndarray:
    """Two-state burst gate; p_off leaves the on state, p_on enters it."""
    u = stream.random(length + 1)
    duty = p_on / (p_on + p_off) if (p_on + p_off) > 0 else 0.0
    state = 1 if u[0] < duty else 0
    out = np.empty(length, dtype=np.int64)
    for i in range(length):
        out[i] = state
        if state == 1:
            if u[i + 1] < p_off:
                state = 0
        elif u[i + 1] < p_on:
            state = 1
    return out


def activity_indicator(counts: np.ndarray) -> np.ndarray:
    """Binary gate: 1 where the count is positive."""
    return (np.asarray(counts) > 0).astype(np.int64)
