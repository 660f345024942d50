"""Scale function, speed measure and boundary classification of a scalar diffusion.

The analysed object is ``dr = b(r) dt + sigma(r) dW`` on ``(0, R)``.  The
scale density is normalised as ``s'(x) = exp(-int_c^x 2b/sigma^2)`` so that
``s`` is increasing with ``s(c) = 0``; the speed density is
``2 / (s'(x) sigma(x)^2)``.  All integrals run in a chart coordinate ``t``
(``x = e^t`` on half-lines, logistic on bounded intervals) where the
``1/x``-type singularities of ``2b/sigma^2`` become bounded.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import InconclusiveError, ValidationError
from .numerics.quadrature import (
    EPS,
    NOISE_FACTOR,
    WINDOW,
    EndpointClass,
    classify_endpoint,
    cumulative_integral,
    integrate_adaptive,
    integrate_panels,
)

SYNCHRONIZES = "Synchronizes"
ERGODIC = "Ergodic"
NOT_APPLICABLE = "NotApplicable"
CRITICAL = "Critical"

CRITICAL_BAND = 1e-4
# Refined local exponents within EXACT_CRITICAL of -1 are exact criticality
# (log divergence); beyond RESOLVED the refined sign is trusted; in between,
# or when the two probes disagree, the verdict is Critical.
EXACT_CRITICAL = 1e-9
RESOLVED = 1e-8
PROBES = (1e-8, 1e-12)

QUAD_TOL = 1e-11


@dataclass(frozen=True)
class SimKernel:
    """Compiled coefficients used by the Monte Carlo engine.

    ``coef(r, params) -> (b, sigma)`` and ``logcoef(y, params) -> (drift, vol)``
    give the equation in ``r`` and in ``y = log r`` (Ito-corrected).
    """

    coef: Callable
    logcoef: Callable
    params: np.ndarray


@dataclass(frozen=True)
class DiffusionSpec:
    """A scalar diffusion on ``(0, R)`` with vectorized coefficient callables."""

    R: float
    drift: Callable
    diffusion: Callable
    reference: float
    label: str = ""
    kernel: Optional[SimKernel] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        R = float(self.R)
        object.__setattr__(self, "R", R)
        if not R > 0:
            raise ValidationError(f"interval end must be positive, got R={R}")
        if not 0 < self.reference < R:
            raise ValidationError(f"reference point {self.reference} not inside (0, {R})")
        x = self.chart.grid(4001)
        with np.errstate(all="ignore"):
            b = np.asarray(self.drift(x), dtype=float)
            s = np.asarray(self.diffusion(x), dtype=float)
        bad = ~(np.isfinite(b) & np.isfinite(s))
        if bad.any():
            w = float(x[np.argmax(bad)])
            raise ValidationError(f"coefficients not finite at x={w:.6g}", witness=w)
        if np.any(s <= 0):
            w = float(x[np.argmax(s <= 0)])
            raise ValidationError(f"diffusion coefficient not positive at x={w:.6g}", witness=w)
        x0 = 1e-6 * min(R, 1.0)
        s0 = float(np.asarray(self.diffusion(np.array([x0])))[0])
        s_ref = float(np.asarray(self.diffusion(np.array([self.reference])))[0])
        if not s0 <= 1e-2 * max(1.0, s_ref):
            raise ValidationError(f"diffusion coefficient does not vanish at 0 (sigma({x0:g})={s0:.3g})",
                                  witness=x0)

    @property
    def finite(self):
        return np.isfinite(self.R)

    @property
    def scale(self):
        """Length scale of the interval used for windows and floors."""
        return self.R if self.finite else max(1.0, self.reference)

    @cached_property
    def chart(self):
        return _Chart(self.R, self.scale)

    @cached_property
    def _an(self):
        return _Analysis(self)


class _Chart:
    """Bijection ``t -> x`` from the real line onto ``(0, R)``."""

    def __init__(self, R, scale):
        self.R = R
        self.scale = scale
        self.finite = np.isfinite(R)

    def x(self, t):
        t = np.asarray(t, dtype=float)
        if not self.finite:
            return np.exp(t)
        R = self.R
        with np.errstate(over="ignore"):
            return np.where(t < 0, R / (1.0 + np.exp(-t)), R - R / (1.0 + np.exp(t)))

    def t(self, x):
        x = np.asarray(x, dtype=float)
        if not self.finite:
            return np.log(x)
        return np.log(x) - np.log(self.R - x)

    def logjac(self, t):
        t = np.asarray(t, dtype=float)
        if not self.finite:
            return t
        return np.log(self.R) - np.logaddexp(0.0, t) - np.logaddexp(0.0, -t)

    def noise(self, t):
        """Relative noise of coefficients evaluated at ``x(t)`` from rounding ``x``."""
        if not self.finite:
            return NOISE_FACTOR * EPS
        return NOISE_FACTOR * EPS * (1.0 + np.exp(np.asarray(t, dtype=float)))

    def grid(self, n):
        lo = 1e-6 * self.scale
        if self.finite:
            return self.x(np.linspace(self.t(lo), -self.t(lo), n))
        return np.geomspace(lo, 1e6 * self.scale, n)


class _Analysis:
    """Vectorized log scale/speed densities and cached boundary work for one spec."""

    def __init__(self, spec):
        self.spec = spec
        self.chart = spec.chart
        self.t_ref = float(self.chart.t(spec.reference))
        self._cache = {}

    def h(self, x):
        """The integrand ``2 b / sigma^2`` of the log scale density."""
        b = np.asarray(self.spec.drift(x), dtype=float)
        s = np.asarray(self.spec.diffusion(x), dtype=float)
        return 2.0 * b / (s * s)

    def _h_t(self, t):
        return self.h(self.chart.x(t)) * np.exp(self.chart.logjac(t))

    def log_sd(self, x):
        """log s'(x) = -int_c^x 2b/sigma^2."""
        # s' = exp(-Phi): absolute accuracy of Phi is relative accuracy of s'
        return -cumulative_integral(self._h_t, self.chart.t(x), self.t_ref, rtol=1e-13, atol=1e-14,
                                    noise=self.chart.noise)

    def log_md(self, x):
        s = np.asarray(self.spec.diffusion(x), dtype=float)
        return np.log(2.0) - self.log_sd(x) - 2.0 * np.log(s)

    def local(self, fn, boundary):
        """``fn`` in the boundary-local coordinate (distance, or 1/x at infinity)."""
        R = self.spec.R
        if boundary == "zero":
            return fn
        if np.isfinite(R):
            return lambda d: fn(R - d)
        return lambda y: fn(1.0 / y) - 2.0 * np.log(y)

    def local_scale(self, boundary):
        if boundary == "R" and not self.spec.finite:
            return 1.0 / self.spec.scale
        return self.spec.scale

    def classify(self, which, boundary):
        key = ("class", which, boundary)
        if key not in self._cache:
            fn = self.log_sd if which == "scale" else self.log_md
            self._cache[key] = classify_endpoint(self.local(fn, boundary), 0.0, "above",
                                                 scale=self.local_scale(boundary), log=True)
        return self._cache[key]

    def scale_from_boundary(self, x, boundary):
        """``|s(x) - s(boundary)|`` for a boundary where ``s`` is finite."""
        cls = self.classify("scale", boundary)
        chart = self.chart
        dmin = 1e-2 * WINDOW[0] * self.local_scale(boundary)
        local = self.local(self.log_sd, boundary)
        v = float(np.asarray(local(np.array([dmin])))[0])
        tail = np.exp(v) * dmin / (cls.exponent + 1.0) if cls.analysis is not None else 0.0
        if boundary == "zero":
            anchor = dmin
        elif self.spec.finite:
            anchor = self.spec.R - dmin
        else:
            anchor = 1.0 / dmin

        def F(t):
            return np.exp(self.log_sd(chart.x(t)) + chart.logjac(t))

        inner = cumulative_integral(F, chart.t(x), float(chart.t(anchor)), rtol=1e-12, noise=chart.noise)
        return tail + np.abs(inner)


def _an(spec):
    return spec._an


def scale_density(spec, x):
    """Scale density ``s'(x)``; equals 1 at the reference point."""
    return np.exp(_an(spec).log_sd(x))


def scale_function(spec, x):
    """Scale function ``s(x) = int_c^x s'(y) dy``."""
    an = _an(spec)
    chart = an.chart

    def F(t):
        return np.exp(an.log_sd(chart.x(t)) + chart.logjac(t))

    return cumulative_integral(F, chart.t(x), an.t_ref, rtol=1e-12, noise=chart.noise)


def speed_density(spec, x):
    """Speed density ``2 / (s'(x) sigma(x)^2)``."""
    return np.exp(_an(spec).log_md(x))


def _boundary_integral(spec, which, boundary):
    """Integral of the scale or speed density over the boundary neighbourhood."""
    an = _an(spec)
    key = ("integral", which, boundary)
    if key not in an._cache:
        fn = an.log_sd if which == "scale" else an.log_md
        c = spec.reference
        lo, hi = (0.0, c) if boundary == "zero" else (c, spec.R)
        an._cache[key] = integrate_adaptive(fn, lo, hi, QUAD_TOL, log=True)
    return an._cache[key]


def scale_limit(spec, boundary):
    """``s(0+)`` or ``s(R-)``: a finite value or ``-inf``/``+inf``."""
    _check_boundary(boundary)
    cls = _an(spec).classify("scale", boundary)
    sign = -1.0 if boundary == "zero" else 1.0
    if not cls.convergent:
        return sign * np.inf
    return sign * _boundary_integral(spec, "scale", boundary).value


def speed_mass(spec, lo, hi):
    """Speed measure of ``(lo, hi)``; ``inf`` when it diverges at an end."""
    if not 0 <= lo < hi <= spec.R:
        raise ValidationError(f"({lo}, {hi}) is not a subinterval of (0, {spec.R})")
    res = integrate_adaptive(_an(spec).log_md, lo, hi, QUAD_TOL, log=True,
                             scale=None if np.isfinite(hi) else spec.scale)
    return res.value


def _check_boundary(boundary):
    if boundary not in ("zero", "R"):
        raise ValidationError(f"boundary must be 'zero' or 'R', got {boundary!r}")


@dataclass(frozen=True)
class BoundaryReport:
    """Feller classification of one boundary point."""

    boundary: str
    scale_limit: float
    accessible: bool
    speed_mass_near: float
    scale_exponent: float = float("nan")
    feller_integral: float = float("nan")


def boundary_classify(spec, boundary):
    """Feller's test: accessible iff ``s`` is finite there and
    ``int |s(x) - s(boundary)| m(dx)`` is finite near it."""
    _check_boundary(boundary)
    an = _an(spec)
    key = ("report", boundary)
    if key in an._cache:
        return an._cache[key]
    limit = scale_limit(spec, boundary)
    near = _boundary_integral(spec, "speed", boundary).value
    exponent = an.classify("scale", boundary).exponent
    if not np.isfinite(limit):
        report = BoundaryReport(boundary, limit, False, near, exponent)
    else:
        def log_feller(x):
            return np.log(an.scale_from_boundary(x, boundary)) + an.log_md(x)

        c = spec.reference
        lo, hi = (0.0, c) if boundary == "zero" else (c, spec.R)
        res = integrate_adaptive(log_feller, lo, hi, QUAD_TOL, log=True,
                                 scale=None if np.isfinite(hi) else spec.scale)
        report = BoundaryReport(boundary, limit, not res.divergent, near, exponent, res.value)
    an._cache[key] = report
    return report


def local_speed_exponent(spec, delta=None, half_width=0.5):
    """Log-slope of the speed density at ``x = delta`` from a short integral.

    ``d log m'/d log x`` is obtained from ``int 2b/sigma^2`` over
    ``[delta e^-h, delta e^h]`` so no error from the long path to the
    reference point enters.
    """
    an = _an(spec)
    if delta is None:
        delta = WINDOW[0] * spec.scale
    t1, t2 = np.log(delta) - half_width, np.log(delta) + half_width

    def F(t):
        x = np.exp(t)
        return an.h(x) * x

    vals, _ = integrate_panels(F, [t1], [t2], rtol=1e-14)
    s1, s2 = np.asarray(spec.diffusion(np.exp([t1, t2])), dtype=float)
    return float((vals[0] - 2.0 * (np.log(s2) - np.log(s1))) / (t2 - t1))


@dataclass(frozen=True)
class SyncVerdict:
    """Outcome of the synchronization dichotomy with its evidence chain."""

    verdict: str
    speed_total: float
    assumptions_ok: bool
    evidence: tuple = ()

    def as_dict(self):
        return dict(self.evidence)


def _zero_speed_finiteness(spec, evidence):
    """True/False for finite/infinite mass near 0, None when undecidable."""
    an = _an(spec)
    try:
        cls: EndpointClass = an.classify("speed", "zero")
    except InconclusiveError as exc:
        evidence.append(("speed_zero_inconclusive", str(exc)))
        return None
    evidence.append(("speed_exponent_zero", cls.exponent))
    if cls.analysis is None or abs(cls.exponent + 1.0) >= CRITICAL_BAND:
        return cls.convergent
    outer, inner = (local_speed_exponent(spec, p * spec.scale) for p in PROBES)
    if not np.isfinite(inner):
        inner = outer
    evidence.append(("speed_local_exponent_zero", inner))
    gap = inner + 1.0
    spread = abs(outer - inner)
    if np.isfinite(gap) and abs(gap) >= max(RESOLVED, 10.0 * spread):
        return gap > 0
    if abs(gap) <= EXACT_CRITICAL and spread <= EXACT_CRITICAL:
        evidence.append(("critical_resolution", "exact critical exponent -1: logarithmic divergence"))
        return False
    evidence.append(("critical_resolution", "exponent within the undecidable band"))
    return None


def _near_zero_mass_resolved(spec):
    """Mass of ``(0, c)`` when the refined exponent is just above -1."""
    an = _an(spec)
    dmin = WINDOW[0] * spec.scale
    core = integrate_adaptive(an.log_md, dmin, spec.reference, QUAD_TOL, log=True).value
    p = local_speed_exponent(spec, dmin)
    return core + float(np.exp(an.log_md(np.array([dmin]))[0])) * dmin / (p + 1.0)


def synchronization_verdict(spec):
    """Decide whether ``r_t -> 0`` in probability via the total speed mass.

    The standing assumptions (both boundaries inaccessible, finite speed mass
    away from 0, ``s(R-) = +inf``) are checked first; if one fails the verdict
    is ``NotApplicable`` and the evidence names it.
    """
    evidence = []
    zero = boundary_classify(spec, "zero")
    right = boundary_classify(spec, "R")
    eps = min(spec.R, 1.0) / 2.0
    away = speed_mass(spec, eps, spec.R)
    evidence += [
        ("scale_limit_zero", zero.scale_limit),
        ("scale_limit_R", right.scale_limit),
        ("scale_exponent_zero", zero.scale_exponent),
        ("accessible_zero", zero.accessible),
        ("accessible_R", right.accessible),
        ("speed_mass_away_from_zero", away),
        ("away_from_zero_eps", eps),
    ]
    violated = []
    if zero.accessible:
        violated.append("boundary 0 is accessible")
    if right.accessible:
        violated.append("boundary R is accessible")
    if not np.isfinite(away):
        violated.append(f"speed measure infinite on [{eps:g}, R)")
    if not right.scale_limit == np.inf:
        violated.append("scale function finite at R")
    finite_near_zero = _zero_speed_finiteness(spec, evidence)
    near_zero = zero.speed_mass_near
    if finite_near_zero and not np.isfinite(near_zero):
        near_zero = _near_zero_mass_resolved(spec)
    if finite_near_zero is None:
        speed_total = float("nan")
    elif finite_near_zero:
        speed_total = near_zero + right.speed_mass_near
    else:
        speed_total = np.inf
    evidence.append(("speed_mass_near_zero", near_zero if finite_near_zero is not False else np.inf))
    if violated:
        evidence.append(("violated", "; ".join(violated)))
        return SyncVerdict(NOT_APPLICABLE, speed_total, False, tuple(evidence))
    if finite_near_zero is None:
        verdict = CRITICAL
    elif finite_near_zero:
        verdict = ERGODIC
    else:
        verdict = SYNCHRONIZES
    return SyncVerdict(verdict, speed_total, True, tuple(evidence))
