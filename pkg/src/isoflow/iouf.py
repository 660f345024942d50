"""Isotropic Ornstein-Uhlenbeck flows on R^d and their distance diffusion.

An isotropic covariance tensor is fixed by its longitudinal and normal
correlation functions ``B_L`` and ``B_N``.  For damping ``c`` the distance
between two points solves

    dr = ((d-1)(1 - B_N(r))/r - c r) dt + sqrt(2 (1 - B_L(r))) dW

on ``(0, inf)`` and the top Lyapunov exponent is
``(d-1) beta_N/2 - beta_L/2 - c`` with ``beta = -B''(0)``.
"""

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numba
import numpy as np

from .diffusion import (
    CRITICAL,
    ERGODIC,
    NOT_APPLICABLE,
    SYNCHRONIZES,
    BoundaryReport,
    DiffusionSpec,
    SimKernel,
    SyncVerdict,
    boundary_classify,
    synchronization_verdict,
)
from .errors import ConsistencyError, DegenerateModelError, ValidationError

LAMBDA_BAND = 1e-4
FD_STEP = 1e-3
BETA_TOL = 1e-4
GRID_POINTS = 2001
NO_INVARIANT_MEASURE = "one-point motion has no invariant probability measure"


@dataclass(frozen=True)
class CovarianceModel:
    """Longitudinal/normal correlation functions of an isotropic covariance tensor.

    ``one_minus_BL`` and ``one_minus_BN`` optionally evaluate ``1 - B``
    without cancellation at small ``r``; they default to ``1 - B(r)``.
    """

    B_L: Callable
    B_N: Callable
    beta_L: float
    beta_N: float
    description: str = ""
    one_minus_BL: Optional[Callable] = field(default=None, compare=False, repr=False)
    one_minus_BN: Optional[Callable] = field(default=None, compare=False, repr=False)
    # compiled (one_minus_BL, one_minus_BN) for the simulation kernel
    compiled: Optional[Tuple[Callable, Callable]] = field(default=None, compare=False, repr=False)

    def gap_L(self, r):
        f = self.one_minus_BL
        return np.asarray(f(r) if f is not None else 1.0 - np.asarray(self.B_L(r)), dtype=float)

    def gap_N(self, r):
        f = self.one_minus_BN
        return np.asarray(f(r) if f is not None else 1.0 - np.asarray(self.B_N(r)), dtype=float)

    @property
    def correlation_length(self):
        return 1.0 / np.sqrt(max(min(self.beta_L, self.beta_N), 1e-300))


@numba.njit(cache=True, nogil=True)
def _gauss_gap(r):
    return -np.expm1(-0.5 * r * r)


def gaussian_covariance():
    """``B_L = B_N = exp(-r^2/2)``: independent components, ``beta_L = beta_N = 1``."""

    def B(r):
        return np.exp(-0.5 * np.asarray(r, dtype=float) ** 2)

    def gap(r):
        return -np.expm1(-0.5 * np.asarray(r, dtype=float) ** 2)

    return CovarianceModel(B, B, 1.0, 1.0, "gaussian exp(-r^2/2)", gap, gap,
                           compiled=(_gauss_gap, _gauss_gap))


@dataclass(frozen=True)
class CovarianceReport:
    """Outcome of :func:`validate_covariance`; ``issues`` holds (check, witness, message)."""

    valid: bool
    issues: Tuple[Tuple[str, float, str], ...]
    beta_L_fd: float
    beta_N_fd: float

    def raise_if_invalid(self):
        if not self.valid:
            check, witness, message = self.issues[0]
            raise ValidationError("; ".join(m for _, _, m in self.issues), witness=witness)


def validate_covariance(model, r_max=None):
    """Check the necessary conditions on ``B_L``, ``B_N`` at sampled points.

    Checked: ``B(0) = 1``, ``|B| <= 1`` on ``[0, r_max]``, ``B'(0) = 0``,
    ``beta = -B''(0) > 0`` matching finite differences within 1e-4, and that
    the correlation is not constant.  Isotropy is structural in the
    ``(B_L, B_N)`` parametrization; positive definiteness is not certified.
    """
    if r_max is None:
        r_max = 20.0 * model.correlation_length
    issues = []
    r = np.linspace(0.0, r_max, GRID_POINTS)
    h = FD_STEP
    fd = {}
    for name, B, gap, beta in (("B_L", model.B_L, model.gap_L, model.beta_L),
                               ("B_N", model.B_N, model.gap_N, model.beta_N)):
        with np.errstate(all="ignore"):
            vals = np.asarray(B(r), dtype=float)
            b0 = float(np.asarray(B(np.array([0.0])))[0])
            g = gap(np.array([h, 2.0 * h]))
        if not abs(b0 - 1.0) <= 1e-12:
            issues.append((f"{name}(0)=1", 0.0, f"{name}(0) = {b0:.12g}, expected 1"))
        bad = ~(np.isfinite(vals) & (np.abs(vals) <= 1.0 + 1e-12))
        if bad.any():
            w = float(r[np.argmax(bad)])
            issues.append((f"|{name}|<=1", w, f"|{name}({w:.6g})| exceeds 1"))
        # B is even in r: one-sided differences of 1 - B give B'(0) and B''(0)
        slope = -(4.0 * g[0] - g[1]) / (2.0 * h)
        if not abs(slope) <= BETA_TOL * max(1.0, abs(beta)):
            issues.append((f"{name}'(0)=0", 0.0, f"{name}'(0) ~ {slope:.3g} is not 0"))
        beta_fd = float(2.0 * g[0] / h ** 2)
        fd[name] = beta_fd
        if not beta > 0:
            issues.append((f"beta_{name[-1]}>0", 0.0, f"beta_{name[-1]} = {beta} is not positive"))
        if not abs(beta_fd - beta) <= BETA_TOL * max(1.0, abs(beta)):
            issues.append((f"beta_{name[-1]}=-{name}''(0)", h,
                           f"beta_{name[-1]} = {beta} but -{name}''(0) ~ {beta_fd:.8g}"))
    one = np.array([1.0])
    if not (float(model.gap_L(one)[0]) > 0 or float(model.gap_N(one)[0]) > 0):
        issues.append(("not constant", 1.0, "covariance is constant: B_L(1) = B_N(1) = 1"))
    return CovarianceReport(not issues, tuple(issues), fd["B_L"], fd["B_N"])


@dataclass(frozen=True)
class OUFlowModel:
    """Isotropic Ornstein-Uhlenbeck flow ``dX = -c X dt + M(dt, X)`` on ``R^d``."""

    d: int
    c: float
    covariance: CovarianceModel

    def __post_init__(self):
        d = self.d
        if isinstance(d, bool) or not float(d).is_integer() or d < 2:
            raise ValidationError(f"dimension must be an integer >= 2, got d={d}")
        object.__setattr__(self, "d", int(d))
        c = float(self.c)
        if not (np.isfinite(c) and c >= 0):
            raise ValidationError(f"damping must be finite and >= 0, got c={c}")
        object.__setattr__(self, "c", c)

    def describe(self):
        return f"iouf d={self.d} c={self.c:g} {self.covariance.description}".strip()


@dataclass(frozen=True)
class TopLyapunov:
    """Top exponent and its value without damping."""

    value: float
    without_damping: float

    def __float__(self):
        return float(self.value)


def top_lyapunov(model):
    """``lambda_1 = (d-1) beta_N/2 - beta_L/2 - c`` and the ``c = 0`` value."""
    cov = model.covariance
    base = (model.d - 1) * cov.beta_N / 2.0 - cov.beta_L / 2.0
    return TopLyapunov(base - model.c, base)


@numba.njit(cache=True, nogil=True)
def _coef_gen(r, p, gapL, gapN):
    d1, c = p[0], p[1]
    return d1 * gapN(r) / r - c * r, np.sqrt(2.0 * gapL(r))


@numba.njit(cache=True, nogil=True)
def _logcoef_gen(y, p, gapL, gapN):
    r = np.exp(y)
    r2 = r * r
    qL = gapL(r) / r2
    qN = gapN(r) / r2
    return p[0] * qN - p[1] - qL, np.sqrt(2.0 * qL)


@functools.lru_cache(maxsize=None)
def _compiled_coefficients(gapL, gapN):
    @numba.njit(nogil=True)
    def coef(r, p):
        return _coef_gen(r, p, gapL, gapN)

    @numba.njit(nogil=True)
    def logcoef(y, p):
        return _logcoef_gen(y, p, gapL, gapN)

    return coef, logcoef


def _kernel_for(model):
    if model.covariance.compiled is None:
        return None
    coef, logcoef = _compiled_coefficients(*model.covariance.compiled)
    return SimKernel(coef, logcoef, np.array([model.d - 1.0, model.c]))


def distance_diffusion(model):
    """The distance diffusion on ``(0, inf)`` with reference point 1.

    Raises
    ------
    DegenerateModelError
        If ``1 - B_L`` is not positive at a sampled interior point.
    """
    cov = model.covariance
    d1, c = model.d - 1.0, model.c
    grid = np.geomspace(1e-6, 1e6, 4001)
    with np.errstate(all="ignore"):
        gL = cov.gap_L(grid)
    bad = ~(gL > 0)
    if bad.any():
        w = float(grid[np.argmax(bad)])
        raise DegenerateModelError(f"sigma^2 = 2(1 - B_L) vanishes at r={w:.6g}", witness=w)

    def drift(x):
        x = np.asarray(x, dtype=float)
        return d1 * cov.gap_N(x) / x - c * x

    def diffusion(x):
        return np.sqrt(2.0 * cov.gap_L(x))

    return DiffusionSpec(np.inf, drift, diffusion, 1.0, label=model.describe(), kernel=_kernel_for(model))


@dataclass(frozen=True)
class IOUFReport:
    """Top exponent, verdict and its analytic prediction for an IOUF."""

    lambda1: float
    lambda1_c0: float
    verdict: SyncVerdict
    predicted: str
    boundaries: Tuple[BoundaryReport, ...] = ()
    reason: str = ""


def predicted_verdict(lambda1):
    if abs(lambda1) < LAMBDA_BAND and lambda1 != 0.0:
        return CRITICAL
    return SYNCHRONIZES if lambda1 <= 0 else ERGODIC


def classify(model):
    """Synchronization verdict for an IOUF, cross-checked against ``lambda_1 > 0``.

    With ``c = 0`` the dichotomy does not apply and the verdict is
    ``NotApplicable``.

    Raises
    ------
    ValidationError
        If the covariance fails validation.
    ConsistencyError
        If speed finiteness disagrees with ``lambda_1 > 0`` outside the band.
    """
    validate_covariance(model.covariance).raise_if_invalid()
    top = top_lyapunov(model)
    predicted = predicted_verdict(top.value)
    if model.c == 0:
        verdict = SyncVerdict(NOT_APPLICABLE, np.inf, False, (("violated", NO_INVARIANT_MEASURE),))
        return IOUFReport(top.value, top.without_damping, verdict, predicted, (), NO_INVARIANT_MEASURE)
    spec = distance_diffusion(model)
    verdict = synchronization_verdict(spec)
    if (verdict.verdict in (SYNCHRONIZES, ERGODIC) and predicted != CRITICAL
            and verdict.verdict != predicted):
        raise ConsistencyError(
            f"speed measure finiteness ({verdict.verdict}) contradicts lambda1={top.value:.6g}"
        )
    bounds = (boundary_classify(spec, "zero"), boundary_classify(spec, "R"))
    return IOUFReport(top.value, top.without_damping, verdict, predicted, bounds)
