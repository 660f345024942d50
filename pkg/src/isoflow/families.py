"""Closed-form scalar diffusions used as oracles, with compiled kernels.

geometric  b = kappa x, sigma = x         s'(x) = x^(-2 kappa)
logistic   b = x (1 - x), sigma = x       speed density 2 e^(2 - 2x), mass e^2
sqrt       b = 0, sigma = sqrt(x)         0 is accessible
"""

import math

import numba
import numpy as np

from .diffusion import DiffusionSpec, SimKernel


@numba.njit(cache=True, nogil=True)
def _geo_coef(r, p):
    return p[0] * r, r


@numba.njit(cache=True, nogil=True)
def _geo_logcoef(y, p):
    return p[0] - 0.5, 1.0


@numba.njit(cache=True, nogil=True)
def _logistic_coef(r, p):
    return r * (1.0 - r), r


@numba.njit(cache=True, nogil=True)
def _logistic_logcoef(y, p):
    return 0.5 - math.exp(y), 1.0


@numba.njit(cache=True, nogil=True)
def _sqrt_coef(r, p):
    return 0.0, math.sqrt(r)


@numba.njit(cache=True, nogil=True)
def _sqrt_logcoef(y, p):
    r = math.exp(y)
    return -0.5 / r, 1.0 / math.sqrt(r)


def geometric_spec(kappa=0.25):
    """``dr = kappa r dt + r dW`` on ``(0, inf)``; ``log r`` is Brownian with drift ``kappa - 1/2``."""
    kappa = float(kappa)

    def drift(x):
        return kappa * np.asarray(x, dtype=float)

    def diffusion(x):
        return np.asarray(x, dtype=float) + 0.0

    return DiffusionSpec(np.inf, drift, diffusion, 1.0, label=f"geometric kappa={kappa:g}",
                         kernel=SimKernel(_geo_coef, _geo_logcoef, np.array([kappa])))


def logistic_spec():
    """``dr = r (1 - r) dt + r dW`` on ``(0, inf)``."""

    def drift(x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 - x)

    def diffusion(x):
        return np.asarray(x, dtype=float) + 0.0

    return DiffusionSpec(np.inf, drift, diffusion, 1.0, label="logistic",
                         kernel=SimKernel(_logistic_coef, _logistic_logcoef, np.zeros(1)))


def sqrt_spec():
    """``dr = sqrt(r) dW`` on ``(0, inf)``: the origin is reached in finite time."""

    def drift(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def diffusion(x):
        return np.sqrt(np.asarray(x, dtype=float))

    return DiffusionSpec(np.inf, drift, diffusion, 1.0, label="sqrt",
                         kernel=SimKernel(_sqrt_coef, _sqrt_logcoef, np.zeros(1)))
