"""Seeded randomness with independent derived streams.

All randomness in this repo flows from a single 64-bit seed.  Sub-systems
(environment, agent, interventions, off-policy action tails, ...) each draw
from a *derived* stream keyed by role tags, so adding draws in one role never
perturbs another.  The generator is Python's Mersenne Twister (``random.Random``),
which produces identical sequences for identical seeds on every platform.
"""

from __future__ import annotations

import hashlib
import random

ALGORITHM = "mt19937/sha256-derive"

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *tags: str | int) -> int:
    """Derive a child seed from ``seed`` and a sequence of role tags.

    The derivation hashes the canonical string ``"<seed>/<tag>/..."`` with
    SHA-256 and keeps the first 8 bytes, so the same (seed, tags) pair always
    yields the same child seed, and distinct tags yield independent streams.
    """
    material = "/".join([str(seed & _MASK64)] + [str(t) for t in tags])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(seed: int, *tags: str | int) -> random.Random:
    """Return a fresh ``random.Random`` for the derived (seed, tags) stream."""
    return random.Random(derive_seed(seed, *tags))
