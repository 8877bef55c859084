"""Counter-based lattice randomness.

All lazy random fields in the package (instruction streams, arrow fields,
sleep-indicator streams) are pure functions of (seed, key) built from a
splitmix64-style hash.  This makes every draw replay-stable: the value at a
lattice key never depends on the order in which other keys were queried,
which is what the Abelian / coupling tests rely on.

The same mixing chain is reimplemented inside the numba kernels
(:mod:`arwflow.engine`); ``tests/test_flow.py`` asserts bit-equality.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_KEY2 = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def hash_u64(seed: int, a: int, b: int) -> int:
    """Hash a (seed, a, b) triple to a uniform 64-bit word."""
    z = mix64((seed & MASK64) ^ ((a & MASK64) * _GOLDEN & MASK64))
    return mix64(z ^ ((b & MASK64) * _KEY2 & MASK64))


def threshold_u64(p: float) -> int:
    """Acceptance threshold such that P[hash < threshold] = p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    return min(int(p * 2.0**64), MASK64)


def bernoulli(seed: int, a: int, b: int, thresh: int) -> bool:
    return hash_u64(seed, a, b) < thresh


def bernoulli_array(seed: int, a: np.ndarray, b: int, thresh: int) -> np.ndarray:
    """Vectorized Bernoulli over an array of first keys."""
    a = np.asarray(a, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (np.uint64(seed & MASK64) ^ (a * np.uint64(_GOLDEN)))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        z = z ^ np.uint64((b * _KEY2) & MASK64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return z < np.uint64(thresh)


def derive_seed(master: int, *labels) -> int:
    """Derive a 64-bit child seed from a master seed and a label path.

    Adding replicas or streams never perturbs existing ones: the child only
    depends on (master, labels), not on how many siblings were derived.
    """
    h = hashlib.sha256()
    h.update(b"arwflow")
    h.update(str(int(master)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")


def make_generator(master: int, *labels) -> np.random.Generator:
    """Seeded numpy generator for the given stream label."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
