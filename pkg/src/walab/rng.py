"""Deterministic randomness: seed derivation and data shuffling.

Two generators are used on purpose:

* epoch shuffles use a splitmix64-driven Fisher-Yates permutation whose
  exact algorithm is fixed below, so another implementation can reproduce
  the same batch order from the same seed;
* weight initialisation and Gaussian noise use numpy's PCG64, seeded via
  :func:`derive_seed`.

A master seed fans out to named substreams ("init", "shuffle", ...), so
changing how one stream is consumed never perturbs the others.
"""

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective mixing function."""
    with np.errstate(over="ignore"):
        z = np.uint64(x & _MASK64)
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return int(z)


def splitmix64_stream(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of a splitmix64 generator with state ``seed``.

    Output i is ``mix64(seed + (i+1) * GOLDEN)`` (all mod 2**64).
    """
    with np.errstate(over="ignore"):
        states = np.uint64(seed & _MASK64) + np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
        z = (states ^ (states >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(master: int, label: str) -> int:
    """Derive an independent substream seed from a master seed and a label.

    The label is hashed (blake2b, 8 bytes, little-endian), XORed into the
    master, and passed through :func:`mix64`.
    """
    h = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")
    return mix64((master & _MASK64) ^ h)


def permutation(n: int, seed: int) -> np.ndarray:
    """Deterministic permutation of ``range(n)`` (backward Fisher-Yates).

    With r[k] the k-th splitmix64 output for ``seed``: for i from n-1 down
    to 1, swap positions i and r[n-1-i] % (i+1). The modulo bias is
    negligible for any realistic n and keeps the algorithm trivially
    portable.
    """
    perm = np.arange(n, dtype=np.int64)
    if n < 2:
        return perm
    r = splitmix64_stream(seed, n - 1)
    moduli = np.arange(n, 1, -1, dtype=np.uint64)
    js = (r % moduli).astype(np.int64)
    a = perm.tolist()
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = js[k]
        a[i], a[j] = a[j], a[i]
    return np.asarray(a, dtype=np.int64)


def generator(master: int, label: str) -> np.random.Generator:
    """PCG64 generator for the named substream of ``master``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, label)))
