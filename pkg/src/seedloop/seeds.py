"""Deterministic seed derivation for per-cycle, per-component RNG streams."""

from __future__ import annotations

import hashlib


def derive_seed(base: int, *parts: object) -> int:
    """Stable 63-bit seed from a base seed and a label path.

    Keeps every component (model init, training shuffles, acquisition,
    oracle noise) on its own reproducible stream so interrupted runs can be
    resumed bit-for-bit.
    """
    text = repr((int(base),) + tuple(str(p) for p in parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
