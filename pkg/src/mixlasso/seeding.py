"""Deterministic seed derivation.

Every random draw in the library hangs off an explicit nonnegative 64-bit
master seed.  Sub-streams (per trial, per purpose) are derived by hashing the
master seed together with string/int labels, so parallel workers can pull
independent, reproducible streams without sharing generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def _label_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"seed labels must be nonnegative, got {label}")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(master_seed: int, *labels) -> int:
    """Hash (master seed, labels...) into a single 64-bit seed."""
    h = hashlib.sha256()
    for part in (master_seed, *labels):
        if isinstance(part, (int, np.integer)):
            h.update(b"i")
            h.update(int(part).to_bytes(16, "little", signed=True))
        else:
            raw = str(part).encode("utf-8")
            h.update(b"s")
            h.update(len(raw).to_bytes(8, "little"))
            h.update(raw)
    return int.from_bytes(h.digest()[:8], "little") & _U64


def seed_sequence(master_seed: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence([_label_int(x) for x in (master_seed, *labels)])


def derive_rng(master_seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *labels))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a Generator; return a Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if isinstance(seed_or_rng, np.random.SeedSequence):
        return np.random.default_rng(seed_or_rng)
    return np.random.default_rng(int(seed_or_rng))
