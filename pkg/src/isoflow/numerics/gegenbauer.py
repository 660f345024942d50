"""Gegenbauer polynomials and the normalized ratios used by sphere flows."""

import math

import numba
import numpy as np
from scipy.special import gammaln

from ..errors import DomainError


@numba.njit(cache=True, nogil=True)
def gegenbauer_scalar(nu, n, x):
    """C^nu_n(x) by the three-term recurrence (no argument checks)."""
    if n == 0:
        return 1.0
    c_prev = 1.0
    c = 2.0 * nu * x
    for k in range(2, n + 1):
        c_next = (2.0 * x * (k + nu - 1.0) * c - (k + 2.0 * nu - 2.0) * c_prev) / k
        c_prev = c
        c = c_next
    return c


@numba.njit(cache=True, nogil=True)
def _gegenbauer_array(nu, n, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = gegenbauer_scalar(nu, n, x[i])
    return out


def _check_nu_n(nu, n):
    if not nu > 0:
        raise DomainError(f"Gegenbauer parameter must be positive, got nu={nu}")
    if int(n) != n or n < 0:
        raise DomainError(f"Gegenbauer degree must be a non-negative integer, got n={n}")


def _apply(nu, n, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return float(gegenbauer_scalar(float(nu), int(n), float(arr)))
    flat = _gegenbauer_array(float(nu), int(n), np.ascontiguousarray(arr.ravel()))
    return flat.reshape(arr.shape)


def gegenbauer_eval(nu, n, x):
    """Evaluate the Gegenbauer polynomial C^nu_n at ``x``.

    Parameters
    ----------
    nu : float
        Positive parameter.
    n : int
        Degree, ``n >= 0``.
    x : float or array_like
        Evaluation points.

    Returns
    -------
    float or ndarray
        Same shape as ``x``.
    """
    _check_nu_n(nu, n)
    return _apply(nu, n, x)


def gegenbauer_at_one(nu, n):
    """Closed form C^nu_n(1) = binom(n + 2 nu - 1, n)."""
    _check_nu_n(nu, n)
    return math.exp(gammaln(n + 2.0 * nu) - gammaln(2.0 * nu) - gammaln(n + 1.0))


def _check_ratio_args(d, l, order):
    if isinstance(d, bool) or int(d) != d or d < 3:
        raise DomainError(f"dimension must be an integer >= 3, got d={d}")
    if isinstance(l, bool) or int(l) != l or l < 1:
        raise DomainError(f"index must be an integer >= 1, got l={l}")
    if order not in (0, 1, 2):
        raise DomainError(f"derivative order must be 0, 1 or 2, got {order}")


def gegenbauer_ratio(d, l, x, order=0):
    """Normalized ratio gamma_l(x) = C^{d/2}_{l-1}(x) / C^{d/2}_{l-1}(1) or a derivative.

    Derivatives use the parameter shift d/dx C^nu_n = 2 nu C^{nu+1}_{n-1}, so
    ``gamma_l(1) == 1`` exactly and no recurrence is differentiated.
    """
    _check_ratio_args(d, l, order)
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise DomainError("gegenbauer_ratio is defined on [-1, 1]")
    nu = d / 2.0
    n = l - 1
    norm = _apply(nu, n, 1.0)
    if order > n:
        return np.zeros_like(arr) if arr.ndim else 0.0
    scale = 1.0
    for j in range(order):
        scale *= 2.0 * (nu + j)
    value = _apply(nu + order, n - order, arr)
    return scale * value / norm


def gegenbauer_ratio_taylor(d, l):
    """Coefficients ``c`` with gamma_l(1 - u) = sum_k c[k] u**k.

    gamma_l^{(k)}(1) = 2^k (nu)_k C^{nu+k}_{n-k}(1) / C^nu_n(1); every term is
    positive, so the expansion about ``x = 1`` is free of cancellation in the
    coefficients themselves.
    """
    _check_ratio_args(d, l, 0)
    nu = d / 2.0
    n = l - 1
    log_norm = gammaln(n + 2.0 * nu) - gammaln(2.0 * nu) - gammaln(n + 1.0)
    coeffs = np.empty(n + 1)
    for k in range(n + 1):
        m = n - k
        lam = nu + k
        log_c = gammaln(m + 2.0 * lam) - gammaln(2.0 * lam) - gammaln(m + 1.0)
        log_deriv = k * math.log(2.0) + gammaln(nu + k) - gammaln(nu) + log_c - log_norm
        coeffs[k] = (-1.0) ** k * math.exp(log_deriv - gammaln(k + 1.0))
    return coeffs
