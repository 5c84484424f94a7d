"""Counter-based random numbers.

Every draw is a pure function of ``(seed, stream, counter)``: the stream key
is ``mix(mix(seed) + stream * K)`` and draw ``n`` of a stream is the n-th
SplitMix64 output started at that key. Walk trials, generator sampling and
Alon-Roichman trials use disjoint stream tags, so results do not depend on
evaluation order or on how trials are split across workers. The compiled
kernel implements the same arithmetic bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
STREAM_MULT = 0xD1B54A32D192ED03
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0

TAG_WALK = 0
TAG_AR = 1
TAG_GENERATORS = 2
TAG_START = 3
N_TAGS = 4


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * M1) & MASK64
    z = ((z ^ (z >> 27)) * M2) & MASK64
    return z ^ (z >> 31)


def stream_id(tag: int, index: int) -> int:
    return (int(index) * N_TAGS + tag) & MASK64


def stream_key(seed: int, stream: int) -> int:
    return mix64((mix64((int(seed) + GAMMA) & MASK64) + stream * STREAM_MULT) & MASK64)


def draw(key: int, counter: int) -> int:
    return mix64((key + (counter + 1) * GAMMA) & MASK64)


def uniform(key: int, counter: int) -> float:
    return (draw(key, counter) >> 11) * INV_2_53


# vectorized ------------------------------------------------------------------

_U = np.uint64


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> _U(30)
    z *= _U(M1)
    z ^= z >> _U(27)
    z *= _U(M2)
    z ^= z >> _U(31)
    return z


def stream_keys(seed: int, streams: np.ndarray) -> np.ndarray:
    base = _U(mix64((int(seed) + GAMMA) & MASK64))
    s = np.asarray(streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(base + s * _U(STREAM_MULT))


def uniform_array(keys: np.ndarray, counters) -> np.ndarray:
    """Uniform doubles in [0, 1) for broadcast ``keys`` x ``counters``."""
    k = np.asarray(keys, dtype=np.uint64)
    n = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64_array(k + (n + _U(1)) * _U(GAMMA))
    return (z >> _U(11)).astype(np.float64) * INV_2_53


def residues(seed: int, stream: int, count: int, modulus: int) -> np.ndarray:
    """``count`` independent uniform residues mod ``modulus`` from one stream."""
    key = np.uint64(stream_key(seed, stream))
    u = uniform_array(key, np.arange(count, dtype=np.uint64))
    return np.minimum(np.floor(u * modulus), modulus - 1).astype(np.int64)


def choice_indices(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF lookup: first index whose cumulative weight exceeds ``u``."""
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)
