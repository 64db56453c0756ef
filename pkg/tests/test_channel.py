import dataclasses

import numpy as np
import pytest

from gridpresence import rng
from gridpresence.channel import (
    gen_fading_sequence,
    gen_interference,
    gen_shadowing_matrix,
    phase_descriptors,
    sample_stable_magnitude,
)
from gridpresence.config import ChannelParams, GeneratorConfig
from gridpresence.topology import build_default_topology


def _lag1(x):
    return float(np.corrcoef(x[:-1], x[1:])[0, 1])


def test_fading_memoryless_case():
    h, _ = gen_fading_sequence(0.0, 100_000, rng.substream("f", 0))
    assert abs(_lag1(h.real)) < 0.01


def test_fading_autocorrelation_matches_rho():
    # analytic AR(1) lag-1 autocorrelation equals rho
    h, _ = gen_fading_sequence(0.95, 100_000, rng.substream("f", 1))
    assert _lag1(h.real) == pytest.approx(0.95, abs=0.01)


def test_fading_unit_power():
    h, _ = gen_fading_sequence(0.9, 100_000, rng.substream("f", 2))
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_fading_rejects_bad_rho():
    with pytest.raises(ValueError):
        gen_fading_sequence(1.0, 10, rng.substream("f", 3))
    with pytest.raises(ValueError):
        gen_fading_sequence(-0.1, 10, rng.substream("f", 3))


def test_phase_constant_real_positive():
    h = np.ones(50, dtype=complex)
    sin, cos, dphase = phase_descriptors(h)
    assert np.array_equal(sin, np.zeros(50))
    assert np.array_equal(cos, np.ones(50))
    assert np.array_equal(dphase, np.zeros(50))


def test_phase_pure_rotation():
    t = np.arange(200)
    h = np.exp(1j * 0.1 * t)
    _, _, dphase = phase_descriptors(h)
    assert dphase[0] == 0.0
    assert np.abs(dphase[1:] - 0.1).max() < 1e-9


def test_phase_unwrap_against_product_oracle():
    # cumulative-angle oracle: the per-step increment is the angle of
    # h(t) * conj(h(t-1)), exact as long as true increments stay within pi
    stream = rng.substream("phase", 4)
    increments = stream.uniform(-2.5, 2.5, 5000)
    phi = np.cumsum(increments)
    h = np.exp(1j * phi) * (1.0 + stream.random(5000))
    _, _, dphase = phase_descriptors(h)
    oracle = np.angle(h[1:] * np.conj(h[:-1]))
    assert np.abs(dphase[1:] - oracle).max() < 1e-9
    # and the trig identity holds everywhere
    sin, cos, _ = phase_descriptors(h)
    assert np.abs(sin**2 + cos**2 - 1.0).max() < 1e-9


def test_phase_rejects_empty():
    with pytest.raises(ValueError):
        phase_descriptors(np.array([]))


def test_shadowing_tier_stds():
    config = GeneratorConfig()
    topo = build_default_topology()
    m = gen_shadowing_matrix(config, topo, 12345, 50_000)
    assert m[0].std() == pytest.approx(8.03, abs=0.8)  # HAN
    assert m[4].std() == pytest.approx(4.0, abs=0.4)  # NAN
    assert m[10].std() == pytest.approx(4.0, abs=0.4)  # WAN (LTE)


def test_shadowing_lag1_matches_ar_coefficient():
    from gridpresence.config import shadow_ar_coefficient

    config = GeneratorConfig()
    topo = build_default_topology()
    m = gen_shadowing_matrix(config, topo, 999, 50_000)
    for node_id, tier in ((0, "HAN"), (4, "NAN"), (10, "WAN")):
        assert _lag1(m[node_id]) == pytest.approx(
            shadow_ar_coefficient(config, tier), abs=0.01
        )


def test_shadowing_shared_components_correlate_same_tier():
    # two HAN nodes share the global and layer innovations, whose variance
    # share is c_g^2 + c_l^2 = 0.30 of the total
    config = GeneratorConfig()
    topo = build_default_topology()
    m = gen_shadowing_matrix(config, topo, 321, 50_000)
    rho = float(np.corrcoef(m[0], m[1])[0, 1])
    share = config.channel.share_global + config.channel.share_layer
    assert rho > 0
    assert rho == pytest.approx(share, abs=0.1)


def test_shadowing_fiber_zero_without_override():
    config = GeneratorConfig()
    topo = build_default_topology()
    m = gen_shadowing_matrix(config, topo, 77, 1000)
    assert np.array_equal(m[8], np.zeros(1000))
    assert np.array_equal(m[9], np.zeros(1000))


def test_shadowing_fiber_override():
    config = dataclasses.replace(
        GeneratorConfig(),
        channel=dataclasses.replace(ChannelParams(), fiber_shadow_override=True),
    )
    topo = build_default_topology()
    m = gen_shadowing_matrix(config, topo, 77, 50_000)
    assert m[8].std() == pytest.approx(4.0, abs=0.4)


def test_interference_fiber_zero():
    config = GeneratorConfig()
    topo = build_default_topology()
    out = gen_interference(topo.nodes[8], 2000, rng.substream("i", 8), config)
    assert np.array_equal(out, np.zeros(2000))


def test_interference_nonnegative():
    config = GeneratorConfig()
    topo = build_default_topology()
    for node in topo.nodes:
        out = gen_interference(node, 5000, rng.substream("i", node.id), config)
        assert out.min() >= 0.0


def test_plc_impulses_clipped():
    # disable the background so the impulse component is observed directly
    config = dataclasses.replace(
        GeneratorConfig(),
        channel=dataclasses.replace(
            ChannelParams(),
            interf_scale_db_by_tech={
                "ZigBee": 0.0, "WiFi": 0.0, "LoRa": 0.0,
                "PLC": 0.0, "LTE": 0.0, "Fiber": 0.0,
            },
        ),
    )
    topo = build_default_topology()
    plc = topo.nodes[6]
    out = gen_interference(plc, 100_000, rng.substream("i", 600), config)
    assert out.max() <= 30.0
    assert out.max() > 5.0  # impulses actually occur


def test_plc_heavy_tailed_vs_background_oracle():
    config = GeneratorConfig()
    topo = build_default_topology()

    def excess_kurtosis(x):
        c = x - x.mean()
        m2 = np.mean(c * c)
        return float(np.mean(c**4) / m2**2 - 3.0)

    plc = gen_interference(topo.nodes[6], 50_000, rng.substream("i", 61), config)
    background_only = gen_interference(
        topo.nodes[2], 50_000, rng.substream("i", 62), config
    )  # WiFi: colored background, no impulses
    k_plc = excess_kurtosis(plc)
    k_bg = excess_kurtosis(background_only)
    assert k_plc > 3.0
    assert k_plc > k_bg + 2.0
    assert abs(k_bg) < 3.0


def test_stable_magnitude_heavy_tail():
    mags = sample_stable_magnitude(1.5, 200_000, rng.substream("s", 0))
    assert (mags > 10).mean() > 0.01  # visibly heavier than Gaussian
    cauchy = sample_stable_magnitude(1.0, 1000, rng.substream("s", 1))
    assert np.isfinite(cauchy).all()


def test_streams_isolated_per_process():
    # fading, shadowing, interference draws come from distinct substreams:
    # regenerating one never changes another
    config = GeneratorConfig()
    topo = build_default_topology()
    h1, _ = gen_fading_sequence(0.9, 1000, rng.substream("fading", 5, 0))
    _ = gen_interference(topo.nodes[6], 1000, rng.substream("interf", 5, 6), config)
    h2, _ = gen_fading_sequence(0.9, 1000, rng.substream("fading", 5, 0))
    assert np.array_equal(h1, h2)
