"""Dense float64 linear algebra helpers, activations and a portable RNG.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64 in C
(row-major) order. The random generator is implemented here rather than taken
from numpy so that weight initialisation, shuffles, data splits and synthetic
noise can be reproduced bit-exactly from any language.

RNG reference recurrence
------------------------
Seeding (SplitMix64, all arithmetic mod 2**64)::

    z = (z + 0x9E3779B97F4A7C15)
    x = z
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB
    out = x ^ (x >> 31)

Four successive SplitMix64 outputs form the xoshiro256** state ``s0..s3``.
Each draw::

    result = rotl(s1 * 5, 7) * 9
    t = s1 << 17
    s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
    s2 ^= t
    s3 = rotl(s3, 45)

Derived draws:

* ``random()``: ``((result >> 11) + 0.5) * 2**-53``, strictly inside (0, 1)
* ``uniform(lo, hi)``: ``lo + (hi - lo) * random()``
* ``normal()``: Box-Muller cosine branch on two ``random()`` draws
  ``sqrt(-2 ln u1) * cos(2 pi u2)``; the sine branch is discarded
* ``below(n)``: ``result % n`` with rejection of ``result >= 2**64 - 2**64 % n``
* ``shuffle``: Fisher-Yates from the last index down, ``j = below(i + 1)``
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, ZeroFanIn

_MASK = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class SeededRng:
    """xoshiro256** seeded through SplitMix64.

    Identical seeds give identical streams. An instance is meant to be owned by
    a single caller; share a seed, not the object.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        sm = self.seed
        s = []
        for _ in range(4):
            sm, out = _splitmix64(sm)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = self.random()
        u2 = self.random()
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def uniform_array(self, shape, lo: float, hi: float) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        flat = np.fromiter((self.uniform(lo, hi) for _ in range(n)), dtype=np.float64, count=n)
        return flat.reshape(shape)

    def normal_array(self, n: int, std: float = 1.0) -> np.ndarray:
        return np.fromiter((self.normal(0.0, std) for _ in range(n)), dtype=np.float64, count=n)


def as_matrix(a) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b``; raises DimensionMismatch on inner-size mismatch."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def sigmoid(x):
    # 1 / (1 + e^-x) written so that exp never overflows
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=np.float64)))


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0.0)


_ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def activation(x: float, kind: str) -> float:
    """Scalar activation by name: ``sigmoid``, ``tanh`` or ``relu``."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return float(fn(float(x)))


def uniform_init(rng: SeededRng, rows: int, cols: int, fan_in: int) -> np.ndarray:
    """``rows x cols`` matrix with entries drawn from U(-k, k), k = 1/sqrt(fan_in).

    Entries are filled in row-major order from ``rng``.
    """
    if fan_in < 1:
        raise ZeroFanIn(f"fan_in must be >= 1, got {fan_in}")
    k = 1.0 / math.sqrt(fan_in)
    return rng.uniform_array((rows, cols), -k, k)
