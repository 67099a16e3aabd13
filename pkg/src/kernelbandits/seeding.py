"""Deterministic per-purpose random streams.

Every random draw in the harness and the concentration lab comes from a
generator keyed by (master seed, trial, round, purpose tag), so adding a
policy or widening the worker pool never perturbs another stream and any
trial can be replayed in isolation.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    return int(tag)


def seed_for(master_seed: int, *tags) -> np.random.SeedSequence:
    entropy = [int(master_seed)] + [_tag_to_int(t) for t in tags]
    return np.random.SeedSequence(entropy)


def rng_for(master_seed: int, *tags) -> np.random.Generator:
    return np.random.default_rng(seed_for(master_seed, *tags))
