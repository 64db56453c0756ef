"""Read-side helpers for a generated dataset directory."""

from __future__ import annotations

import os
from dataclasses import dataclass

import pandas as pd

from . import pipeline
from .config import GeneratorConfig, load_config
from .features import Standardizer
from .rng import SPLITS


@dataclass
class Dataset:
    """Lazy view over a dataset directory."""

    path: str
    config: GeneratorConfig
    node_ids: list[int]

    def node_table(self, node_id: int, split: str) -> pd.DataFrame:
        # round_trip parsing: the default fast parser is off by 1 ulp on
        # some decimal strings, which would break exact-reproduction audits
        return pd.read_csv(
            os.path.join(self.path, pipeline.node_csv_name(node_id, split)),
            float_precision="round_trip",
        )

    def manifest(self) -> pd.DataFrame:
        return pd.read_csv(
            os.path.join(self.path, pipeline.MANIFEST_FILE),
            dtype={"nodes": str},
        )

    def nodes(self) -> pd.DataFrame:
        return pd.read_csv(os.path.join(self.path, pipeline.TOPOLOGY_NODES_FILE))

    def standardizer(self) -> Standardizer:
        with open(
            os.path.join(self.path, pipeline.NORMALIZATION_FILE), encoding="utf-8"
        ) as fh:
            return Standardizer.from_json(fh.read())


def open_dataset(path) -> Dataset:
    """Open a dataset directory, requiring the core metadata to exist."""
    config_path = os.path.join(path, pipeline.CONFIG_FILE)
    nodes_path = os.path.join(path, pipeline.TOPOLOGY_NODES_FILE)
    for required in (config_path, nodes_path):
        if not os.path.exists(required):
            raise FileNotFoundError(f"not a dataset directory: missing {required}")
    config = load_config(config_path)
    node_ids = pd.read_csv(nodes_path)["id"].tolist()
    missing = [
        pipeline.node_csv_name(i, split)
        for split in SPLITS
        for i in node_ids
        if not os.path.exists(os.path.join(path, pipeline.node_csv_name(i, split)))
    ]
    if missing:
        raise FileNotFoundError(f"dataset incomplete; missing {missing[:3]}")
    return Dataset(path=str(path), config=config, node_ids=node_ids)
