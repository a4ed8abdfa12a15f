"""Deterministic seed derivation.

Every stochastic call site derives its own child seed from a root seed plus a
label path, so results never depend on scheduling order or draw counts
elsewhere in the program.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *labels) -> int:
    """Stable 63-bit child seed for (root, labels...)."""
    key = repr((int(root),) + tuple(labels)).encode()
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(root: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root, *labels)))
