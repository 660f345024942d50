"""Vectorized adaptive Gauss-Kronrod quadrature with endpoint power-law analysis.

Integrals are computed in a coordinate ``t`` in which power-law endpoint
behaviour becomes exponential decay (``x = a + e^t`` near a finite endpoint,
a logistic map for finite intervals).  The part of the integral beyond the
sampling window is estimated from the fitted endpoint exponent.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError, FitFailure, InconclusiveError, NonConvergenceError

# QUADPACK qk15 abscissae/weights; the 7-point Gauss rule sits on the odd nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[:-1][::-1]])
_GWEIGHTS[7] = _WG[-1]

WINDOW = (1e-8, 1e-3)
WINDOW_SAMPLES = 40
FIT_TOL = 0.01
DIVERGENCE_MARGIN = 1e-4
MAX_PANELS = 40000
EPS = np.finfo(float).eps
# relative evaluation noise attributed to one ulp of argument rounding
NOISE_FACTOR = 200.0


def gk15(F, lo, hi):
    """Apply the 15-point Kronrod rule to every panel ``[lo[i], hi[i]]``.

    ``F`` must accept a 2-D array of abscissae.  Returns the Kronrod value, the
    QUADPACK error estimate and the integral of ``|F|``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    x = center[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(F(x), dtype=float)
    kron = half * (fx @ _KWEIGHTS)
    gauss = half * (fx @ _GWEIGHTS)
    absval = np.abs(half) * (np.abs(fx) @ _KWEIGHTS)
    mean = kron / np.where(half == 0, 1.0, half) * 0.5
    resasc = np.abs(half) * (np.abs(fx - mean[:, None]) @ _KWEIGHTS)
    raw = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5)
    err = np.where((resasc > 0) & np.isfinite(scaled), scaled, raw)
    return kron, err, absval


def integrate_panels(F, lo, hi, rtol=1e-12, atol=0.0, noise=None, max_panels=MAX_PANELS):
    """Adaptively integrate ``F`` over each of the panels ``[lo[i], hi[i]]``.

    Each initial panel is refined independently by bisection until its error
    estimate is below ``rtol`` times the integral of ``|F|`` over it plus
    ``atol`` per unit length (and a small floor tied to the overall magnitude).
    ``noise(t)``, if given, bounds the relative rounding noise of ``F`` near
    ``t``; refinement stops once the error estimate reaches that level.

    Returns
    -------
    values, errors : ndarray
        One entry per initial panel.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = lo.size
    values = np.zeros(n)
    errors = np.zeros(n)
    if n == 0:
        return values, errors
    owner = np.arange(n)
    floor = None
    total_width = float(np.sum(np.abs(hi - lo))) or 1.0
    for _ in range(64):
        kron, err, absval = gk15(F, lo, hi)
        if not np.all(np.isfinite(kron)):
            bad = np.flatnonzero(~np.isfinite(kron))[0]
            raise NonConvergenceError(
                f"non-finite integrand on panel [{lo[bad]:.6g}, {hi[bad]:.6g}]"
            )
        if floor is None:
            floor = 1e-3 * rtol * float(np.sum(absval)) / total_width
        width = np.abs(hi - lo)
        rel = rtol if noise is None else rtol + noise(0.5 * (lo + hi))
        ok = (err <= rel * absval + (floor + atol) * width) | (width <= 1e-13 * (1.0 + np.abs(lo)))
        np.add.at(values, owner[ok], kron[ok])
        np.add.at(errors, owner[ok], err[ok])
        if ok.all():
            return values, errors
        lo, hi, owner = lo[~ok], hi[~ok], owner[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi, owner = np.concatenate([lo, mid]), np.concatenate([mid, hi]), np.concatenate([owner, owner])
        if lo.size > max_panels:
            break
    raise NonConvergenceError("adaptive quadrature exceeded its panel budget")


def cumulative_integral(F, t_points, t_ref, rtol=1e-12, atol=0.0, max_len=0.5, noise=None):
    """Return ``int_{t_ref}^{t_i} F(t) dt`` for every entry of ``t_points``.

    The breakpoints are the sorted points themselves, so consecutive gaps are
    short and each gap is integrated adaptively; long gaps are pre-split into
    panels of length at most ``max_len``.
    """
    t_points = np.asarray(t_points, dtype=float)
    shape = t_points.shape
    flat = t_points.ravel()
    knots = np.unique(np.concatenate([flat, [float(t_ref)]]))
    if knots.size == 1:
        return np.zeros(shape)
    gaps = np.diff(knots)
    pieces = np.maximum(1, np.ceil(gaps / max_len).astype(int))
    gap_id = np.repeat(np.arange(gaps.size), pieces)
    offsets = np.arange(gap_id.size) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    step = gaps[gap_id] / pieces[gap_id]
    lo = knots[gap_id] + offsets * step
    hi = np.where(offsets == pieces[gap_id] - 1, knots[gap_id + 1], lo + step)
    vals, _ = integrate_panels(F, lo, hi, rtol=rtol, atol=atol, noise=noise)
    per_gap = np.bincount(gap_id, weights=vals, minlength=gaps.size)
    cum = np.concatenate([[0.0], np.cumsum(per_gap)])
    cum -= cum[np.searchsorted(knots, t_ref)]
    return cum[np.searchsorted(knots, flat)].reshape(shape)


@dataclass(frozen=True)
class EndpointAnalysis:
    """Power-law fit ``f(x) ~ C |x - endpoint|^exponent`` near an endpoint."""

    endpoint: float
    side: str
    exponent: float
    fit_residual: float
    integrable: bool
    log_prefactor: float = float("nan")


def _sample_logs(f, endpoint, side, deltas, log):
    sign = 1.0 if side == "above" else -1.0
    x = endpoint + sign * deltas
    with np.errstate(all="ignore"):
        values = np.asarray(f(x), dtype=float)
        if log:
            return values
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            return None
        return np.log(values)


def endpoint_exponent(f, endpoint, side, window=None, *, scale=1.0, samples=WINDOW_SAMPLES,
                      log=False, fit_tol=FIT_TOL):
    """Least-squares power-law exponent of ``f`` at ``endpoint``.

    ``log f`` is regressed on ``log delta`` (plus a term linear in ``delta``
    that absorbs the first analytic correction) over a geometric grid of
    distances ``delta`` from the endpoint.

    Parameters
    ----------
    f : callable
        Vectorized function; returns ``log f`` instead when ``log=True``.
    endpoint : float
    side : {"above", "below"}
        Whether the samples lie above or below the endpoint.
    window : (float, float), optional
        Distance range; defaults to ``[1e-8, 1e-3] * scale``.

    Raises
    ------
    FitFailure
        If ``f`` is non-positive or non-finite at a sample, or the maximum
        relative deviation of the fit exceeds ``fit_tol``.
    """
    if side not in ("above", "below"):
        raise DomainError(f"side must be 'above' or 'below', got {side!r}")
    lo, hi = window if window is not None else (WINDOW[0] * scale, WINDOW[1] * scale)
    if not 0 < lo < hi:
        raise DomainError(f"invalid endpoint window ({lo}, {hi})")
    deltas = np.geomspace(lo, hi, samples)
    logs = _sample_logs(f, endpoint, side, deltas, log)
    if logs is None or not np.all(np.isfinite(logs)):
        raise FitFailure(f"function is non-positive or non-finite near {endpoint}")
    design = np.column_stack([np.ones(samples), np.log(deltas), deltas / hi])
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    resid = logs - design @ coef
    with np.errstate(over="ignore"):
        residual = float(np.max(np.abs(np.expm1(resid))))
    if not residual <= fit_tol:
        raise FitFailure(f"power-law fit residual {residual:.3g} exceeds {fit_tol} near {endpoint}")
    exponent = float(coef[1])
    return EndpointAnalysis(endpoint=float(endpoint), side=side, exponent=exponent,
                            fit_residual=residual, integrable=exponent > -1.0,
                            log_prefactor=float(coef[0]))


@dataclass(frozen=True)
class EndpointClass:
    """Integrability decision at one endpoint."""

    convergent: bool
    analysis: Optional[EndpointAnalysis]
    reason: str

    @property
    def exponent(self):
        return self.analysis.exponent if self.analysis is not None else float("nan")


def _trend(logs, deltas):
    """Classify super-power growth/decay from local log-slopes (innermost first)."""
    if np.any(np.isnan(logs)):
        return None
    if np.any(logs == np.inf):
        return EndpointClass(False, None, "function overflows approaching the endpoint")
    finite = np.isfinite(logs)
    if not finite.any():
        return EndpointClass(True, None, "function vanishes on the whole window")
    if not finite.all():
        # underflow can only come from decay towards the endpoint
        first = np.argmax(finite)
        if finite[first:].all() and np.all(np.diff(logs[first:]) >= 0):
            return EndpointClass(True, None, "function underflows approaching the endpoint")
        return None
    slopes = np.diff(logs) / np.diff(np.log(deltas))
    if np.all(slopes > -1.0 + DIVERGENCE_MARGIN) and np.all(np.diff(slopes) <= 0):
        return EndpointClass(True, None, "decays faster than any power")
    if np.all(slopes < -1.0 - DIVERGENCE_MARGIN) and np.all(np.diff(slopes) >= 0):
        return EndpointClass(False, None, "grows faster than any power")
    return None


def classify_endpoint(f, endpoint, side, *, scale=1.0, log=False, window=None):
    """Decide integrability of ``f`` at ``endpoint`` from its window behaviour.

    A fitted exponent ``<= -1 + 1e-4`` with a clean fit means divergence.  When
    no power law fits, growth or decay faster than any power is recognised from
    the local slopes; anything else is inconclusive.
    """
    try:
        fit = endpoint_exponent(f, endpoint, side, window, scale=scale, log=log)
    except FitFailure as exc:
        lo, hi = window if window is not None else (WINDOW[0] * scale, WINDOW[1] * scale)
        deltas = np.geomspace(lo, hi, WINDOW_SAMPLES)
        sign = 1.0 if side == "above" else -1.0
        with np.errstate(all="ignore"):
            vals = np.asarray(f(endpoint + sign * deltas), dtype=float)
            logs = vals if log else np.log(np.abs(vals))
        verdict = _trend(logs, deltas)
        if verdict is None:
            raise InconclusiveError(f"cannot classify endpoint {endpoint}: {exc}") from exc
        return verdict
    if fit.exponent <= -1.0 + DIVERGENCE_MARGIN:
        return EndpointClass(False, fit, f"power-law exponent {fit.exponent:.6g} <= -1")
    return EndpointClass(True, fit, f"power-law exponent {fit.exponent:.6g} > -1")


@dataclass(frozen=True)
class QuadResult:
    """Outcome of :func:`integrate_adaptive`; ``value`` is infinite when divergent."""

    value: float
    divergent: bool
    error: float
    left: EndpointClass
    right: EndpointClass


def _tail(local_f, delta, cls, log):
    """Mass of the endpoint piece ``(0, delta)`` in the endpoint-local coordinate."""
    with np.errstate(all="ignore"):
        v = float(np.asarray(local_f(np.array([delta])), dtype=float)[0])
    fval = np.exp(v) if log else v
    if cls.analysis is not None:
        return fval * delta / (cls.analysis.exponent + 1.0), 0.0
    # super-power decay: the piece is bounded by the last sample times its width
    return 0.0, abs(fval) * delta


def integrate_adaptive(f: Callable, a: float, b: float, tol: float = 1e-10, *, log: bool = False,
                       scale: Optional[float] = None) -> QuadResult:
    """Integrate ``f`` over the open interval ``(a, b)``; ``b`` may be ``inf``.

    Both endpoints are analysed first; a divergent endpoint short-circuits to a
    divergent result.  Otherwise the integral is computed adaptively on the
    window-truncated interval and the truncated pieces are added from the
    fitted power laws.  Infinite upper limits go through ``x = a + 1/y``.

    Raises
    ------
    NonConvergenceError
        If neither a converged value nor a confident divergence is found.
    """
    if not a < b:
        raise DomainError(f"need a < b, got ({a}, {b})")
    if not np.isfinite(a):
        raise DomainError("lower limit must be finite")
    infinite = not np.isfinite(b)
    if scale is None:
        scale = max(1.0, abs(a)) if infinite else b - a
    dmin = WINDOW[0] * scale

    def left_f(d):
        return f(a + d)

    if infinite:
        # g(y) = f(a + 1/y) / y^2 near y = 0
        if log:
            def right_f(y):
                return f(a + 1.0 / y) - 2.0 * np.log(y)
        else:
            def right_f(y):
                return f(a + 1.0 / y) / y ** 2
        right_scale = 1.0 / scale
    else:
        def right_f(d):
            return f(b - d)
        right_scale = scale

    left = classify_endpoint(left_f, 0.0, "above", scale=scale, log=log)
    right = classify_endpoint(right_f, 0.0, "above", scale=right_scale, log=log)
    if not (left.convergent and right.convergent):
        side_f, side_scale = (left_f, scale) if not left.convergent else (right_f, right_scale)
        with np.errstate(all="ignore"):
            probe = float(np.asarray(side_f(np.array([WINDOW[0] * side_scale])))[0])
        sign = 1.0 if (log or probe >= 0) else -1.0
        return QuadResult(sign * np.inf, True, 0.0, left, right)

    if infinite:
        ymin = WINDOW[0] * right_scale
        t_lo, t_hi = np.log(dmin), np.log(1.0 / ymin)

        def x_of(t):
            return a + np.exp(t)

        def logjac(t):
            return t

        def noise(t):
            # x - a loses relative precision when e^t << |a|
            return NOISE_FACTOR * EPS * (1.0 + abs(a) * np.exp(-t))
    else:
        L = b - a
        t_lo = np.log(dmin / (L - dmin))
        t_hi = -t_lo

        def x_of(t):
            # split the logistic map so both ends keep relative precision
            return np.where(t < 0, a + L / (1.0 + np.exp(-t)), b - L / (1.0 + np.exp(t)))

        def logjac(t):
            return np.log(L) - np.logaddexp(0.0, t) - np.logaddexp(0.0, -t)

        def noise(t):
            # the distance to the nearer endpoint is only known to eps * |endpoint|
            end = np.where(t < 0, abs(a), abs(b))
            return NOISE_FACTOR * EPS * (1.0 + end / L * (1.0 + np.exp(np.abs(t))))

    def F(t):
        with np.errstate(all="ignore"):
            if log:
                return np.exp(f(x_of(t)) + logjac(t))
            return f(x_of(t)) * np.exp(logjac(t))

    n = int(np.ceil(t_hi - t_lo))
    edges = np.linspace(t_lo, t_hi, n + 1)
    vals, errs = integrate_panels(F, edges[:-1], edges[1:], rtol=tol, noise=noise)
    core = float(np.sum(vals))
    tail_l, bound_l = _tail(left_f, dmin, left, log)
    tail_r, bound_r = _tail(right_f, WINDOW[0] * right_scale, right, log)
    value = core + tail_l + tail_r
    error = float(np.sum(errs)) + bound_l + bound_r
    if bound_l + bound_r > tol * abs(value):
        raise NonConvergenceError("endpoint remainder is not negligible")
    return QuadResult(value, False, error, left, right)
