"""Deterministic random streams.

Permutation draws are keyed by (seed, purpose, cell id), so any scheduling
of per-cell work (serial, threaded, reordered) reproduces the same bytes.
Python's builtin ``hash`` is salted per process and must not be used here.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stable_hash", "substream", "derive_seed"]


def stable_hash(token: str) -> int:
    """Process-independent 64-bit hash of a string token."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(seed: int, *tokens: str | int) -> np.random.Generator:
    """Generator for an independent stream named by ``tokens`` under ``seed``."""
    entropy = [int(seed)] + [stable_hash(str(t)) for t in tokens]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *tokens: str | int) -> int:
    """Stable child seed for handing to APIs that take a plain integer."""
    parts = [str(int(seed))] + [str(t) for t in tokens]
    return stable_hash("\x1f".join(parts))
