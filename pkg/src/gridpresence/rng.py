"""Deterministic random-stream derivation.

Every stochastic process in the generator draws from a named Philox
substream keyed by a SHA-256 hash of its identifier path, so streams are
independent per (process, node, split), stable across platforms, and
insensitive to generation order. Adding a node or toggling the attack
engine never perturbs any other stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

SPLITS = ("train", "val", "test")


def _key128(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


def derive_split_seed(seed_base: int, split: str) -> int:
    """Stable 64-bit seed for one split, a pure function of (seed_base, split)."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    digest = hashlib.sha256(f"split|{seed_base}|{split}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(*parts) -> np.random.Generator:
    """Counter-based generator keyed by a path of identifiers.

    ``substream("fading", split_seed, node_id)`` always yields the same
    sequence for the same path, independent of every other substream.
    """
    return np.random.Generator(np.random.Philox(key=_key128(*parts)))
