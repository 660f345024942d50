"""Counter-based normal variates for per-path random streams.

Each path owns a stream keyed by ``(seed, path)``; the ``k``-th 64-bit word
of a stream is ``splitmix64(key + k * G)``, so any path can be regenerated
independently of how paths are split across workers.  Normals come from a
128-layer ziggurat (Marsaglia-Tsang with Doornik's layer test), which needs
about one hash per variate.
"""

import math

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SECONDARY = np.uint64(0xD1B54A32D192ED03)
_INV53 = 1.0 / 9007199254740992.0

ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3
_LAYERS = 128


def _tables():
    f = lambda x: math.exp(-0.5 * x * x)  # noqa: E731
    x = np.zeros(_LAYERS + 1)
    x[0] = _ZIG_V / f(ZIG_R)
    x[1] = ZIG_R
    for i in range(2, _LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(_ZIG_V / x[i - 1] + f(x[i - 1])))
    return x, x[1:] / x[:-1]


ZIG_X, ZIG_RATIO = _tables()


@numba.njit(inline="always")
def mix64(z):
    """splitmix64 finalizer."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def stream_key(seed, path):
    return mix64(mix64(np.uint64(seed)) ^ (np.uint64(path) * GOLDEN + _SECONDARY))


@numba.njit(inline="always")
def secondary_key(key):
    return mix64(key ^ _SECONDARY)


@numba.njit(inline="always")
def uniform(key, ctr):
    """Uniform on (0, 1) and the advanced counter."""
    ctr += np.uint64(1)
    return ((mix64(key + ctr * GOLDEN) >> np.uint64(11)) + 0.5) * _INV53, ctr


@numba.njit(inline="always")
def normal(key, ctr):
    """Standard normal variate and the advanced counter."""
    X = ZIG_X
    RR = ZIG_RATIO
    while True:
        ctr += np.uint64(1)
        z = mix64(key + ctr * GOLDEN)
        i = np.int64(z & np.uint64(127))
        u = 2.0 * ((z >> np.uint64(11)) * _INV53) - 1.0
        if abs(u) < RR[i]:
            return u * X[i], ctr
        if i == 0:
            # tail beyond ZIG_R
            while True:
                a, ctr = uniform(key, ctr)
                b, ctr = uniform(key, ctr)
                x = math.log(a) / ZIG_R
                if -2.0 * math.log(b) >= x * x:
                    break
            return (x - ZIG_R if u < 0 else ZIG_R - x), ctr
        x = u * X[i]
        f0 = math.exp(-0.5 * (X[i] * X[i] - x * x))
        f1 = math.exp(-0.5 * (X[i + 1] * X[i + 1] - x * x))
        w, ctr = uniform(key, ctr)
        if f1 + w * (f0 - f1) < 1.0:
            return x, ctr


@numba.njit(nogil=True, cache=True)
def _normals(seed, path, n):
    key = stream_key(np.uint64(seed), np.uint64(path))
    ctr = np.uint64(0)
    out = np.empty(n)
    for k in range(n):
        out[k], ctr = normal(key, ctr)
    return out


def normals(seed, path, n):
    """The first ``n`` normals of stream ``(seed, path)``."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return _normals(np.uint64(seed), np.uint64(int(path)), int(n))
