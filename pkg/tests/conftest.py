import dataclasses

import pytest

from gridpresence import pipeline
from gridpresence.config import AttackParams, GeneratorConfig, MixtureParams
from gridpresence.dataset_io import open_dataset
from gridpresence.topology import build_default_topology


def small_config(**overrides) -> GeneratorConfig:
    """Desk-scale config shrunk for fast pipeline tests."""
    base = GeneratorConfig(t_train=2000, t_val=600, t_test=600, burn_in=120)
    return dataclasses.replace(base, **overrides)


def shadow_only_attack(**overrides) -> AttackParams:
    """Attack config whose coherence perturbation is the identity.

    With a degenerate zero coherence-drop, no mapping offsets, no Wi-Fi
    reflection, and non-overlapping windows, the only perturbation is the
    per-window shadow loss, so paired runs admit exact SNR comparisons.
    """
    params = AttackParams(
        kdrop_mix=MixtureParams(
            modes=(0.0,), weights=(1.0,), sigmas=(0.0,), clip_lo=0.0, clip_hi=1e-9
        ),
        alpha_a0=0.0,
        sigma_s0=0.0,
        wifi_reflect_prob=0.0,
        allow_overlap=False,
    )
    return dataclasses.replace(params, **overrides)


@pytest.fixture(scope="session")
def topology():
    return build_default_topology()


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("small") / "dataset"
    pipeline.generate_dataset(small_config(), out)
    return out


@pytest.fixture(scope="session")
def small_dataset(small_dataset_dir):
    return open_dataset(small_dataset_dir)


@pytest.fixture(scope="session")
def default_dataset_dir(tmp_path_factory):
    """The full-size default-config dataset; shared by the acceptance suite."""
    out = tmp_path_factory.mktemp("default") / "dataset"
    pipeline.generate_dataset(GeneratorConfig(), out)
    return out


@pytest.fixture(scope="session")
def default_dataset(default_dataset_dir):
    return open_dataset(default_dataset_dir)
