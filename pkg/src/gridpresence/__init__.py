"""Seed-reproducible benchmark generator for presence-only passive
reconnaissance in tiered smart-grid communications, with a validation
harness and a federated logistic-regression baseline."""

from .config import GeneratorConfig, load_config, validate_config
from .pipeline import generate_dataset, generate_split
from .topology import build_default_topology

__all__ = [
    "GeneratorConfig",
    "load_config",
    "validate_config",
    "build_default_topology",
    "generate_dataset",
    "generate_split",
]

__version__ = "0.1.0"
