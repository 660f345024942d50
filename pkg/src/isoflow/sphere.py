"""Isotropic Brownian flows on the sphere S^{d-1} and their distance diffusion.

A model is a dimension ``d >= 3`` and two finite, nonnegative coefficient
lists ``a`` (gradient part) and ``b`` (solenoidal part), indexed from
``l = 1``.  The covariance functions are

    alpha(x) = sum a_l g_l(x) + sum b_l (x g_l(x) - (1 - x^2)/(d-2) g_l'(x))
    beta(x)  = sum a_l g_l'(x) + sum b_l (-g_l(x) - x/(d-2) g_l'(x))

with ``g_l = C^{d/2}_{l-1} / C^{d/2}_{l-1}(1)``, and the distance process on
``(0, pi)`` has

    sigma^2(r) = 2 [alpha(1) - alpha(cos r) cos r + beta(cos r) sin^2 r]
    b(r)       = (d-2)/sin r (alpha(1) cos r - alpha(cos r)).

Both coefficients cancel catastrophically near ``r = 0`` (and ``b`` near ``pi``
when ``alpha(1) + alpha(-1) = 0``).  Near the ends they are evaluated from
exact polynomial re-expansions in ``u = 1 - cos r = 2 sin^2(r/2)`` and
``v = 1 + cos r = 2 cos^2(r/2)``; in the bulk the Gegenbauer recurrence is
summed directly.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numba
import numpy as np
from numpy.polynomial import polynomial as npoly

from .diffusion import (
    CRITICAL,
    ERGODIC,
    SYNCHRONIZES,
    BoundaryReport,
    DiffusionSpec,
    SimKernel,
    SyncVerdict,
    boundary_classify,
    synchronization_verdict,
)
from .errors import ConsistencyError, DegenerateModelError, DomainError, ValidationError
from .numerics.gegenbauer import gegenbauer_at_one, gegenbauer_ratio, gegenbauer_ratio_taylor

MAX_INDEX = 64
DEGENERACY_GRID = 10_000
DEGENERACY_TOL = 1e-12
FD_STEP = 1e-6
FD_RTOL = 1e-6
LAMBDA_BAND = 1e-4

# layout of the packed parameter vector consumed by the compiled kernels
_H_D, _H_L, _H_USW, _H_ALPHA1 = 0, 1, 2, 3
_H_S, _H_Q, _H_N, _H_P, _H_A, _H_B, _H_INV, _H_DINV = 4, 6, 8, 10, 12, 13, 14, 15
_HEADER = 16


@dataclass(frozen=True)
class SphereModel:
    """Isotropic Brownian flow on ``S^{d-1}`` given by Gegenbauer coefficients.

    Parameters
    ----------
    d : int
        Ambient dimension, ``d >= 3``.
    a, b : sequence of float
        Nonnegative gradient and solenoidal coefficients; entry ``i`` is the
        coefficient of index ``l = i + 1``.
    """

    d: int
    a: Tuple[float, ...] = ()
    b: Tuple[float, ...] = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        d = self.d
        if isinstance(d, bool) or not float(d).is_integer() or d < 3:
            raise ValidationError(f"sphere dimension must be an integer >= 3, got d={d}")
        object.__setattr__(self, "d", int(d))
        for name in ("a", "b"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) > MAX_INDEX:
                raise ValidationError(f"at most {MAX_INDEX} {name}-coefficients are supported")
            if not all(np.isfinite(v) and v >= 0 for v in vals):
                raise ValidationError(f"{name}-coefficients must be finite and nonnegative")
            object.__setattr__(self, name, vals)
        if not any(v > 0 for v in self.a + self.b):
            raise ValidationError("at least one coefficient must be positive")

    @property
    def L(self):
        """Largest index with a nonzero coefficient."""
        nz = [i + 1 for i, v in enumerate(self.a) if v > 0] + [i + 1 for i, v in enumerate(self.b) if v > 0]
        return max(nz)

    def coefficients(self):
        """``(a, b)`` as arrays of length :attr:`L`."""
        L = self.L
        a = np.zeros(L)
        b = np.zeros(L)
        a[:min(L, len(self.a))] = self.a[:L]
        b[:min(L, len(self.b))] = self.b[:L]
        return a, b

    def describe(self):
        if self.label:
            return self.label
        a, b = self.coefficients()

        def terms(name, c):
            return [f"{name}{l + 1}={v:g}" for l, v in enumerate(c) if v > 0]

        return f"sphere d={self.d} " + " ".join(terms("a", a) + terms("b", b))

    @cached_property
    def _packed(self):
        return _pack(self)


# -- exact polynomial re-expansions ---------------------------------------------------


def _series(model, at_pi):
    """alpha, beta as polynomials in ``u = 1 - x`` (or ``v = 1 + x`` when ``at_pi``)."""
    d = model.d
    a, b = model.coefficients()
    A = np.zeros(1)
    B = np.zeros(1)
    # x and 1 - x^2 in the local variable
    x_poly = np.array([-1.0, 1.0]) if at_pi else np.array([1.0, -1.0])
    one_minus_x2 = np.array([0.0, 2.0, -1.0])
    for i in range(model.L):
        l = i + 1
        c = gegenbauer_ratio_taylor(d, l)
        k = np.arange(1, c.size)
        if at_pi:
            # g_l(-y) = (-1)^(l-1) g_l(y)
            sign = (-1.0) ** (l - 1)
            g = sign * c
            dg = sign * k * c[1:]
        else:
            g = c
            dg = -k * c[1:]
        if dg.size == 0:
            dg = np.zeros(1)
        if a[i]:
            A = npoly.polyadd(A, a[i] * g)
            B = npoly.polyadd(B, a[i] * dg)
        if b[i]:
            alpha_b = npoly.polysub(npoly.polymul(x_poly, g), npoly.polymul(one_minus_x2, dg) / (d - 2))
            beta_b = npoly.polysub(-g, npoly.polymul(x_poly, dg) / (d - 2))
            A = npoly.polyadd(A, b[i] * alpha_b)
            B = npoly.polyadd(B, b[i] * beta_b)
    return A, B


def _near_zero_polys(model):
    """``(S, Q)`` with ``b = -(d-2) tan(r/2) S(u)`` and ``sigma^2 = 2 u Q(u)``."""
    A, B = _series(model, at_pi=False)
    Ap = np.concatenate([A, [0.0]])
    Q = npoly.polyadd(Ap[:-1] - Ap[1:], npoly.polymul([2.0, -1.0], B))
    S = np.concatenate([[A[0] + (A[1] if A.size > 1 else 0.0)], A[2:]])
    return S, Q


def _near_pi_polys(model, alpha1):
    """``(N, P)`` with ``b = (d-2) N(v) / sin r`` and ``sigma^2 = 2 P(v)``."""
    A, B = _series(model, at_pi=True)
    P = npoly.polyadd(npoly.polyadd([alpha1], npoly.polymul(A, [1.0, -1.0])),
                      npoly.polymul(B, [0.0, 2.0, -1.0]))
    N = npoly.polysub(npoly.polymul([alpha1], [-1.0, 1.0]), A)
    # alpha(1) + alpha(-1) is an exact cancellation when the pi-end degenerates
    scale = max(1.0, abs(alpha1))
    if abs(P[0]) <= 1e-14 * scale:
        P[0] = 0.0
        N[0] = 0.0
    return N, P


def _pack(model):
    d, L = model.d, model.L
    a, b = model.coefficients()
    S, Q = _near_zero_polys(model)
    alpha1 = float(np.sum(a) + np.sum(b))
    N, P = _near_pi_polys(model, alpha1)
    nu = d / 2.0
    norms = np.array([gegenbauer_at_one(nu, l - 1) for l in range(1, L + 1)])
    usw = min(0.5, 2.0 / L ** 2)
    parts = [S, Q, N, P, a, b, 1.0 / norms, 2.0 * nu / norms]
    header = np.zeros(_HEADER)
    header[_H_D], header[_H_L], header[_H_USW], header[_H_ALPHA1] = d, L, usw, alpha1
    off = _HEADER
    for slot, arr in zip((_H_S, _H_Q, _H_N, _H_P), parts[:4]):
        header[slot], header[slot + 1] = off, arr.size
        off += arr.size
    for slot, arr in zip((_H_A, _H_B, _H_INV, _H_DINV), parts[4:]):
        header[slot] = off
        off += arr.size
    return np.concatenate([header] + parts)


# -- compiled evaluation ---------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _horner(P, slot, z):
    off = int(P[slot])
    n = int(P[slot + 1])
    acc = 0.0
    for k in range(n - 1, -1, -1):
        acc = acc * z + P[off + k]
    return acc


@numba.njit(cache=True, nogil=True)
def _alpha_beta_direct(x, P):
    d = P[_H_D]
    L = int(P[_H_L])
    nu = 0.5 * d
    oa, ob = int(P[_H_A]), int(P[_H_B])
    oi, odi = int(P[_H_INV]), int(P[_H_DINV])
    alpha = 0.0
    beta = 0.0
    # C^nu_n(x) and C^{nu+1}_{n-1}(x) advanced together
    c_prev, c = 0.0, 1.0
    e_prev, e = 0.0, 0.0
    for i in range(L):
        n = i
        if n == 1:
            c_prev, c = c, 2.0 * nu * x
            e_prev, e = 0.0, 1.0
        elif n >= 2:
            c_next = (2.0 * x * (n + nu - 1.0) * c - (n + 2.0 * nu - 2.0) * c_prev) / n
            c_prev, c = c, c_next
            m = n - 1
            if m == 1:
                e_next = 2.0 * (nu + 1.0) * x
            else:
                e_next = (2.0 * x * (m + nu) * e - (m + 2.0 * nu) * e_prev) / m
            e_prev, e = e, e_next
        g = c * P[oi + i]
        dg = e * P[odi + i]
        al = P[oa + i]
        bl = P[ob + i]
        alpha += al * g + bl * (x * g - (1.0 - x * x) / (d - 2.0) * dg)
        beta += al * dg + bl * (-g - x / (d - 2.0) * dg)
    return alpha, beta


@numba.njit(cache=True, nogil=True)
def sphere_sig2_b(r, P):
    """``(sigma^2(r), b(r))`` for a packed sphere model."""
    d2 = P[_H_D] - 2.0
    usw = P[_H_USW]
    h = 0.5 * r
    sh = np.sin(h)
    ch = np.cos(h)
    u = 2.0 * sh * sh
    v = 2.0 * ch * ch
    if u <= usw:
        sig2 = 2.0 * u * _horner(P, _H_Q, u)
        b = -d2 * (sh / ch) * _horner(P, _H_S, u)
    elif v <= usw:
        sig2 = 2.0 * _horner(P, _H_P, v)
        b = d2 * _horner(P, _H_N, v) / np.sin(r)
    else:
        x = np.cos(r)
        alpha, beta = _alpha_beta_direct(x, P)
        a1 = P[_H_ALPHA1]
        sig2 = 2.0 * (a1 - alpha * x + beta * (1.0 - x * x))
        b = d2 / np.sin(r) * (a1 * x - alpha)
    return sig2, b


@numba.njit(cache=True, nogil=True)
def sphere_coef(r, P):
    sig2, b = sphere_sig2_b(r, P)
    return b, np.sqrt(max(sig2, 0.0))


@numba.njit(cache=True, nogil=True)
def sphere_logcoef(y, P):
    """Drift and volatility of ``log r`` (Ito-corrected)."""
    r = np.exp(y)
    h = 0.5 * r
    sh = np.sin(h)
    u = 2.0 * sh * sh
    if u <= P[_H_USW]:
        ch = np.cos(h)
        q = _horner(P, _H_Q, u)
        s = _horner(P, _H_S, u)
        ratio = sh / r
        u_over_r2 = 2.0 * ratio * ratio
        drift = -(P[_H_D] - 2.0) * (sh / ch) / r * s - u_over_r2 * q
        return drift, np.sqrt(max(2.0 * u_over_r2 * q, 0.0))
    sig2, b = sphere_sig2_b(r, P)
    return b / r - 0.5 * sig2 / (r * r), np.sqrt(max(sig2, 0.0)) / r


@numba.njit(cache=True, nogil=True)
def _sig2_b_array(r, P):
    n = r.shape[0]
    sig2 = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        sig2[i], b[i] = sphere_sig2_b(r[i], P)
    return sig2, b


@numba.njit(cache=True, nogil=True)
def _sig2_over_u(r, P):
    out = np.empty(r.shape[0])
    for i in range(r.shape[0]):
        h = 0.5 * r[i]
        u = 2.0 * np.sin(h) ** 2
        if u <= P[_H_USW]:
            out[i] = 2.0 * _horner(P, _H_Q, u)
        else:
            out[i] = sphere_sig2_b(r[i], P)[0] / u
    return out


def _evaluate(model, r):
    r = np.asarray(r, dtype=float)
    sig2, b = _sig2_b_array(np.ascontiguousarray(r.ravel()), model._packed)
    return sig2.reshape(r.shape), b.reshape(r.shape)


def distance_coefficients(model, r):
    """``(b(r), sigma^2(r))`` of the distance diffusion at ``r`` in ``(0, pi)``."""
    sig2, b = _evaluate(model, r)
    return b, sig2


# -- public operations -----------------------------------------------------------------


def alpha_beta(model, r):
    """Evaluate ``(alpha(r), beta(r))`` by term-wise Gegenbauer summation.

    Parameters
    ----------
    model : SphereModel
    r : float or array_like
        Points in ``(-1, 1]``.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= -1.0) or np.any(arr > 1.0):
        raise DomainError("alpha_beta is defined on (-1, 1]")
    d = model.d
    a, b = model.coefficients()
    alpha = np.zeros_like(arr)
    beta = np.zeros_like(arr)
    for i in range(model.L):
        if not (a[i] or b[i]):
            continue
        g = gegenbauer_ratio(d, i + 1, arr, 0)
        dg = gegenbauer_ratio(d, i + 1, arr, 1)
        alpha = alpha + a[i] * g + b[i] * (arr * g - (1.0 - arr ** 2) / (d - 2) * dg)
        beta = beta + a[i] * dg + b[i] * (-g - arr / (d - 2) * dg)
    if arr.ndim == 0:
        return float(alpha), float(beta)
    return alpha, beta


def boundary_coefficients(model):
    """``(alpha(1), alpha'(1), beta(1))``.

    ``alpha'(1)`` is summed term by term (``b_l`` contributes
    ``1 + g_l'(1) d/(d-2)``) and checked against a one-sided three-point
    difference of :func:`alpha_beta`.

    Raises
    ------
    ConsistencyError
        If the two values of ``alpha'(1)`` disagree.
    """
    d = model.d
    a, b = model.coefficients()
    dg1 = np.array([gegenbauer_ratio(d, l, 1.0, 1) for l in range(1, model.L + 1)])
    alpha1 = float(np.sum(a) + np.sum(b))
    beta1 = float(np.sum(a * dg1) - np.sum(b * (1.0 + dg1 / (d - 2))))
    alpha1p = float(np.sum(a * dg1) + np.sum(b * (1.0 + dg1 * d / (d - 2))))
    h = FD_STEP
    al0, _ = alpha_beta(model, 1.0)
    al1, _ = alpha_beta(model, 1.0 - h)
    al2, _ = alpha_beta(model, 1.0 - 2.0 * h)
    fd = (3.0 * al0 - 4.0 * al1 + al2) / (2.0 * h)
    if abs(fd - alpha1p) > FD_RTOL * max(abs(alpha1p), alpha1):
        raise ConsistencyError(f"alpha'(1) term-wise {alpha1p!r} disagrees with finite difference {fd!r}")
    return alpha1, alpha1p, beta1


def lyapunov_spectrum(model):
    """``lambda_n = (d-2n-1)/2 alpha'(1) - (d-1)/2 alpha(1) - n beta(1)``, n = 1..d-1."""
    alpha1, alpha1p, beta1 = boundary_coefficients(model)
    d = model.d
    return [(d - 2 * n - 1) / 2 * alpha1p - (d - 1) / 2 * alpha1 - n * beta1 for n in range(1, d)]


def gamma1(model):
    """Power-law exponent of ``1/s'`` at 0: ``(d-2)(a' - a)/(a' + a + 2 beta)`` at 1.

    Raises
    ------
    DegenerateModelError
        If the denominator (the leading coefficient of ``sigma^2/r^2``) is
        not positive.
    """
    alpha1, alpha1p, beta1 = boundary_coefficients(model)
    den = alpha1p + alpha1 + 2.0 * beta1
    if den <= 1e-12:
        raise DegenerateModelError(f"sigma^2/r^2 -> {den:.3g} at 0; the model is degenerate")
    return (model.d - 2) * (alpha1p - alpha1) / den


def check_nondegenerate(model, n=DEGENERACY_GRID):
    """Raise :class:`DegenerateModelError` unless ``sigma^2 > 0`` on an ``n``-point grid."""
    r = np.pi * np.arange(1, n + 1) / (n + 1)
    ratio = _sig2_over_u(r, model._packed)
    a, b = model.coefficients()
    scale = float(np.sum(a) + np.sum(b))
    bad = ratio <= DEGENERACY_TOL * scale
    if bad.all():
        raise DegenerateModelError(f"σ² ≡ 0 on (0, π) for {model.describe()}")
    if bad.any():
        w = float(r[np.argmax(bad)])
        raise DegenerateModelError(f"sigma^2 vanishes at r={w:.6g} for {model.describe()}", witness=w)


def distance_diffusion(model):
    """The two-point distance diffusion on ``(0, pi)`` with reference ``pi/2``.

    Raises
    ------
    DegenerateModelError
        If ``sigma^2`` is not positive on the sampling grid.
    """
    check_nondegenerate(model)

    def drift(x):
        return _evaluate(model, x)[1]

    def diffusion(x):
        return np.sqrt(np.maximum(_evaluate(model, x)[0], 0.0))

    kernel = SimKernel(sphere_coef, sphere_logcoef, model._packed)
    return DiffusionSpec(np.pi, drift, diffusion, np.pi / 2, label=model.describe(), kernel=kernel)


@dataclass(frozen=True)
class SphereReport:
    """Lyapunov data, boundary exponent and synchronization verdict of a model."""

    alpha1: float
    alpha1_prime: float
    beta1: float
    spectrum: Tuple[float, ...]
    gamma1: float
    verdict: SyncVerdict
    predicted: str
    boundaries: Tuple[BoundaryReport, ...] = ()

    @property
    def lambda1(self):
        return self.spectrum[0]


def predicted_verdict(lambda1):
    """Verdict implied by the sign of the top exponent alone."""
    if abs(lambda1) < LAMBDA_BAND and lambda1 != 0.0:
        return CRITICAL
    return SYNCHRONIZES if lambda1 <= 0 else ERGODIC


def classify(model):
    """Spectrum, ``gamma1`` and the numeric synchronization verdict of a model.

    The numeric verdict is cross-checked against the sign of ``lambda_1``
    whenever the dichotomy applies and ``|lambda_1| >= 1e-4``.

    Raises
    ------
    DegenerateModelError
        For models with vanishing ``sigma^2``.
    ConsistencyError
        If the numeric and analytic verdicts disagree.
    """
    alpha1, alpha1p, beta1 = boundary_coefficients(model)
    spectrum = tuple(lyapunov_spectrum(model))
    spec = distance_diffusion(model)
    g1 = gamma1(model)
    verdict = synchronization_verdict(spec)
    predicted = predicted_verdict(spectrum[0])
    if (verdict.verdict in (SYNCHRONIZES, ERGODIC) and predicted != CRITICAL
            and verdict.verdict != predicted):
        raise ConsistencyError(
            f"numeric verdict {verdict.verdict} contradicts lambda1={spectrum[0]:.6g} for {model.describe()}"
        )
    bounds = (boundary_classify(spec, "zero"), boundary_classify(spec, "R"))
    return SphereReport(alpha1, alpha1p, beta1, spectrum, g1, verdict, predicted, bounds)
