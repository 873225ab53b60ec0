"""Counter-based derivation of per-task random streams from one master seed."""

from __future__ import annotations

import hashlib
from collections.abc import Iterable

import numpy as np


class SeedError(ValueError):
    pass


def _label_key(label: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def child_seed(master_seed: int, label: str) -> np.random.SeedSequence:
    """SeedSequence for ``label`` that depends only on (master_seed, label)."""
    return np.random.SeedSequence(int(master_seed), spawn_key=_label_key(label))


def stream(master_seed: int, label: str) -> np.random.Generator:
    """Philox generator for one task; identical for identical (seed, label)."""
    return np.random.Generator(np.random.Philox(child_seed(master_seed, label)))


def resolve_seed_tree(master_seed: int, labels: Iterable[str]) -> dict[str, np.random.Generator]:
    """One independent stream per label.

    The derivation hashes each label into the SeedSequence spawn key, so the
    result does not depend on label order or on which worker consumes which
    stream.
    """
    out: dict[str, np.random.Generator] = {}
    for label in labels:
        if label in out:
            raise SeedError(f"duplicate label {label!r}")
        out[label] = stream(master_seed, label)
    return out


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
