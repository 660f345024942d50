"""Seeded, parallel Euler-Maruyama simulation of distance diffusions.

The state is advanced in one of three charts: ``r`` itself in the bulk,
``y = log r`` below ``r_switch`` and ``z = log(R - r)`` within ``r_switch`` of
a finite right end.  The log charts cannot overshoot their boundary, and near
0 they are exactly the linearisation that governs synchronization.  When a
step would move the state too far relative to its distance from a boundary
(``|b| dt > 0.1 dist`` or ``sigma sqrt(dt) > 0.25 dist``) it is split into
adaptive substeps whose Brownian increments are drawn from the bridge
conditioned on the step's increment, so the coarse path is unchanged.

Path ``i`` draws from the counter-based stream ``(seed, i)``; results do not
depend on how paths are distributed over threads.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numba
import numpy as np
from scipy.stats import norm

from .diffusion import DiffusionSpec
from .errors import StepSizeError, ValidationError
from .rng import normal, secondary_key, stream_key

DRIFT_FRACTION = 0.1
VOL_FRACTION = 0.25
BLOCK = 512
Z95 = float(norm.ppf(0.975))
REGIME_LIMIT = 0.2

# a clamp event ends once the path is ``e^_REARM`` times the clamp distance away
_REARM = math.log(2.0)
_FROZEN = 1
_EXITED = 2
_MODE_R, _MODE_LOW, _MODE_HIGH = 0, 1, 2


class RegimeWarning(UserWarning):
    """Too many paths left the small-separation regime."""


@dataclass(frozen=True)
class SimConfig:
    """Time grid, path count, seed and boundary handling of a simulation.

    ``floor``, ``r_switch`` default to ``1e-12`` and ``0.1`` times the
    interval scale of the simulated spec; ``ceil_eps`` is the clamp distance
    below a finite right end.
    """

    dt: float
    horizon: float
    paths: int
    seed: int
    floor: Optional[float] = None
    r_switch: Optional[float] = None
    ceil_eps: float = 1e-6
    threads: int = 1
    max_substeps: int = 1 << 16

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not (self.horizon > self.dt and np.isfinite(self.horizon)):
            raise ValidationError(f"horizon must exceed dt, got T={self.horizon}, dt={self.dt}")
        if isinstance(self.paths, bool) or int(self.paths) != self.paths or self.paths < 1:
            raise ValidationError(f"paths must be a positive integer, got {self.paths}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.ceil_eps > 0:
            raise ValidationError("ceil_eps must be positive")
        if int(self.threads) < 1:
            raise ValidationError("threads must be >= 1")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    def resolved(self, spec):
        """``(floor, r_switch)`` for ``spec``, validated against its interval."""
        floor = self.floor if self.floor is not None else 1e-12 * spec.scale
        r_switch = self.r_switch if self.r_switch is not None else 0.1 * spec.scale
        limit = spec.R / 2 if spec.finite else np.inf
        if not 0 < floor < r_switch < limit:
            raise ValidationError(f"need 0 < floor ({floor:g}) < r_switch ({r_switch:g}) < {limit:g}")
        return float(floor), float(r_switch)


@numba.njit(inline="always")
def _rates(mode, r, y, coef, logcoef, params, R):
    """``(drift, vol, rate)`` in the current chart; ``rate`` is ``|b|/dist``."""
    if mode == _MODE_LOW:
        mu, v = logcoef(y, params)
        return mu, v, abs(mu + 0.5 * v * v)
    if mode == _MODE_HIGH:
        w = math.exp(y)
        b, s = coef(R - w, params)
        v = s / w
        return -b / w - 0.5 * v * v, v, abs(b) / w
    b, s = coef(r, params)
    dist = r
    if R - r < dist:
        dist = R - r
    return b, s / dist, abs(b) / dist


@numba.njit(nogil=True)
def _run_block(coef, logcoef, params, R, r0, dt, n_steps, rec_steps, seed, first, count,
               r_switch, floor, ceil_eps, max_sub, out, flags, clamps):
    """Simulate paths ``first .. first+count-1``; returns (status, substeps).

    ``status`` is 0 on success or ``1 + path offset`` when a step needed more
    than ``max_sub`` substeps.
    """
    finite = R < np.inf
    ylo = math.log(floor)
    ysw = math.log(r_switch)
    zlo = math.log(ceil_eps)
    sq = math.sqrt(dt)
    n_rec = rec_steps.shape[0]
    total_sub = 0
    for p in range(count):
        key = stream_key(np.uint64(seed), np.uint64(first + p))
        key2 = secondary_key(key)
        ctr = np.uint64(0)
        ctr2 = np.uint64(0)
        r = r0
        y = 0.0
        mode = _MODE_R
        flag = 0
        nclamp = 0
        at_ceiling = False
        if r < r_switch:
            mode = _MODE_LOW
            y = math.log(r)
        elif finite and R - r < r_switch:
            mode = _MODE_HIGH
            y = math.log(R - r)
        else:
            flag |= _EXITED
        ri = 0
        for k in range(1, n_steps + 1):
            g, ctr = normal(key, ctr)
            dW = sq * g
            # fast paths: a single step that passes the size checks
            if mode == _MODE_LOW:
                mu, v = logcoef(y, params)
                if abs(mu + 0.5 * v * v) * dt <= DRIFT_FRACTION and v * v * dt <= VOL_FRACTION * VOL_FRACTION:
                    y += mu * dt + v * dW
                    if y <= ylo:
                        flag |= _FROZEN
                        while ri < n_rec:
                            out[p, ri] = floor
                            ri += 1
                        break
                    if y >= ysw:
                        r = math.exp(y)
                        mode = _MODE_R
                        flag |= _EXITED
                    if ri < n_rec and rec_steps[ri] == k:
                        val = r if mode == _MODE_R else math.exp(y)
                        while ri < n_rec and rec_steps[ri] == k:
                            out[p, ri] = val
                            ri += 1
                    continue
            elif mode == _MODE_R:
                b, s = coef(r, params)
                dist = r
                if R - r < dist:
                    dist = R - r
                if abs(b) * dt <= DRIFT_FRACTION * dist and s * s * dt <= (VOL_FRACTION * dist) ** 2:
                    rn = r + b * dt + s * dW
                    if rn >= r_switch and not (finite and R - rn < r_switch):
                        r = rn
                        if ri < n_rec and rec_steps[ri] == k:
                            while ri < n_rec and rec_steps[ri] == k:
                                out[p, ri] = r
                                ri += 1
                        continue
            tau = dt
            nsub = 0
            while True:
                mu, v, rate = _rates(mode, r, y, coef, logcoef, params, R)
                h = tau
                if rate * h > DRIFT_FRACTION:
                    h = DRIFT_FRACTION / rate
                if v * v * h > VOL_FRACTION * VOL_FRACTION:
                    h = (VOL_FRACTION / v) ** 2
                if h < tau:
                    xi, ctr2 = normal(key2, ctr2)
                    inc = dW * (h / tau) + math.sqrt(h * (tau - h) / tau) * xi
                    nsub += 1
                    if nsub > max_sub:
                        return 1 + p, total_sub
                else:
                    h = tau
                    inc = dW
                if mode == _MODE_LOW:
                    y += mu * h + v * inc
                    if y <= ylo:
                        flag |= _FROZEN
                        break
                    if y >= ysw:
                        r = math.exp(y)
                        mode = _MODE_R
                        flag |= _EXITED
                elif mode == _MODE_HIGH:
                    y += mu * h - v * inc
                    if y < zlo:
                        y = zlo
                        if not at_ceiling:
                            nclamp += 1
                            at_ceiling = True
                    elif y > zlo + _REARM:
                        at_ceiling = False
                    if y >= ysw:
                        r = R - math.exp(y)
                        mode = _MODE_R
                else:
                    dist = r
                    if R - r < dist:
                        dist = R - r
                    rn = r + mu * h + v * dist * inc
                    if rn <= 0.0:
                        # redo the move in the log chart
                        mu2, v2 = logcoef(math.log(r), params)
                        y = math.log(r) + mu2 * h + v2 * inc
                        mode = _MODE_LOW
                        if y <= ylo:
                            flag |= _FROZEN
                            break
                    elif finite and rn >= R - ceil_eps:
                        y = zlo
                        if not at_ceiling:
                            nclamp += 1
                            at_ceiling = True
                        mode = _MODE_HIGH
                    else:
                        r = rn
                        if r < r_switch:
                            mode = _MODE_LOW
                            y = math.log(r)
                        elif finite and R - r < r_switch:
                            mode = _MODE_HIGH
                            y = math.log(R - r)
                tau -= h
                dW -= inc
                if tau <= 0.0:
                    break
            total_sub += nsub
            if flag & _FROZEN:
                while ri < n_rec:
                    out[p, ri] = floor
                    ri += 1
                break
            if ri < n_rec and rec_steps[ri] == k:
                if mode == _MODE_LOW:
                    val = math.exp(y)
                elif mode == _MODE_HIGH:
                    val = R - math.exp(y)
                else:
                    val = r
                while ri < n_rec and rec_steps[ri] == k:
                    out[p, ri] = val
                    ri += 1
        flags[p] = flag
        clamps[p] = nclamp
    return 0, total_sub


@dataclass(frozen=True)
class PathSample:
    """Distances at the recorded times for every path, plus per-path flags."""

    times: np.ndarray
    values: np.ndarray
    frozen: np.ndarray
    exited: np.ndarray
    clamps: np.ndarray
    substeps: int
    steps: int
    floor: float
    r_switch: float
    seed: int

    @property
    def clamp_fraction(self):
        return float(self.clamps.sum()) / max(1, self.steps * self.values.shape[0])


def _thread_count(cfg):
    env = os.environ.get("ISOFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValidationError(f"ISOFLOW_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ValidationError("ISOFLOW_THREADS must be >= 1")
        return n
    return int(cfg.threads)


def _record_steps(times, dt, n_steps):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("at least one recording time is required")
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - times) > 1e-9 * np.maximum(1.0, times)):
        raise ValidationError("recording times must be multiples of dt")
    if np.any(steps < 1) or np.any(steps > n_steps):
        raise ValidationError("recording times must lie in (0, horizon]")
    return steps


def simulate_distance_paths(spec: DiffusionSpec, r0: float, cfg: SimConfig, times=None) -> PathSample:
    """Euler-Maruyama paths of ``spec`` from ``r0``, recorded at ``times``.

    ``times`` defaults to the horizon.  Paths that reach ``floor`` are frozen
    there; excursions past ``R - ceil_eps`` are clamped and counted.

    Raises
    ------
    ValidationError
        If ``r0`` or the configuration is invalid, or ``spec`` has no
        compiled kernel.
    StepSizeError
        If a step needs more than ``cfg.max_substeps`` substeps.
    """
    if spec.kernel is None:
        raise ValidationError(f"diffusion {spec.label!r} has no compiled simulation kernel")
    if not 0 < r0 < spec.R:
        raise ValidationError(f"r0={r0} is not inside (0, {spec.R})")
    floor, r_switch = cfg.resolved(spec)
    n_steps = cfg.steps
    if times is None:
        times = [n_steps * cfg.dt]
    order = np.argsort(np.asarray(times, dtype=float), kind="stable")
    rec = _record_steps(np.asarray(times, dtype=float)[order], cfg.dt, n_steps)
    P = int(cfg.paths)
    values = np.empty((P, rec.size))
    flags = np.zeros(P, dtype=np.int64)
    clamps = np.zeros(P, dtype=np.int64)
    k = spec.kernel
    params = np.ascontiguousarray(k.params, dtype=float)
    blocks = [(s, min(BLOCK, P - s)) for s in range(0, P, BLOCK)]

    def run(block):
        s, n = block
        return _run_block(k.coef, k.logcoef, params, float(spec.R), float(r0), float(cfg.dt),
                          n_steps, rec, np.uint64(cfg.seed), s, n, r_switch, floor,
                          float(cfg.ceil_eps), int(cfg.max_substeps),
                          values[s:s + n], flags[s:s + n], clamps[s:s + n])

    threads = min(_thread_count(cfg), len(blocks))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    for (s, _), (status, _) in zip(blocks, results):
        if status:
            raise StepSizeError(
                f"path {s + status - 1}: dt={cfg.dt:g} cannot be honoured within "
                f"{cfg.max_substeps} substeps"
            )
    substeps = int(sum(sub for _, sub in results))
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return PathSample(np.asarray(times, dtype=float), values[:, inverse], (flags & _FROZEN) > 0,
                      (flags & _EXITED) > 0, clamps, substeps, n_steps, floor, r_switch, int(cfg.seed))


def wilson_interval(successes, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    successes = np.asarray(successes, dtype=float)
    p = successes / n
    den = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


@dataclass(frozen=True)
class DistanceLawEstimate:
    """Empirical ``P(r_t <= eta)`` on a (time, threshold) grid with Wilson 95% intervals."""

    times: np.ndarray
    thresholds: np.ndarray
    prob: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    paths_used: int
    seed: int
    frozen_fraction: float = 0.0
    clamp_fraction: float = 0.0

    @property
    def ci_halfwidth(self):
        return 0.5 * (self.ci_hi - self.ci_lo)

    def rows(self):
        """``(t, eta, p_hat, ci_lo, ci_hi)`` sorted by ``(t, eta)``."""
        out = []
        for i in np.argsort(self.times, kind="stable"):
            for j in np.argsort(self.thresholds, kind="stable"):
                out.append((float(self.times[i]), float(self.thresholds[j]), float(self.prob[i, j]),
                            float(self.ci_lo[i, j]), float(self.ci_hi[i, j])))
        return out


def _check_thresholds(etas):
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    if etas.size == 0 or np.any(~np.isfinite(etas)) or np.any(etas <= 0):
        raise ValidationError("thresholds eta must be positive (P(r_t <= 0) is a null event)")
    return etas


def estimate_sync_probability(spec, r0, etas, times, cfg) -> DistanceLawEstimate:
    """Empirical distance law ``P(r_t <= eta)`` with Wilson 95% intervals.

    Paths frozen at the floor count as ``r_t <= eta`` for every
    ``eta >= floor``.
    """
    etas = _check_thresholds(etas)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    sample = simulate_distance_paths(spec, r0, cfg, times)
    n = sample.values.shape[0]
    counts = np.stack([np.count_nonzero(sample.values <= eta, axis=0) for eta in etas], axis=1)
    lo, hi = wilson_interval(counts, n)
    return DistanceLawEstimate(times, etas, counts / n, lo, hi, n, int(cfg.seed),
                               float(sample.frozen.mean()), sample.clamp_fraction)


@dataclass(frozen=True)
class LyapunovEstimate:
    """Mean of ``(1/T) log(r_T/r_0)`` over paths that stayed in the linear regime."""

    mean: float
    stderr: float
    ci_lo: float
    ci_hi: float
    paths_used: int
    excluded_fraction: float
    regime_ok: bool


def estimate_top_lyapunov(spec, r0_small, cfg) -> LyapunovEstimate:
    """Top-exponent surrogate from small initial separations.

    Paths that leave ``(floor, r_switch)`` are excluded; a
    :class:`RegimeWarning` is issued when more than 20% are.
    """
    if not 0 < r0_small <= 1e-4 * spec.scale:
        raise ValidationError(f"r0_small must lie in (0, {1e-4 * spec.scale:g}]")
    sample = simulate_distance_paths(spec, r0_small, cfg)
    keep = ~(sample.exited | sample.frozen)
    n = int(keep.sum())
    excluded = 1.0 - n / sample.values.shape[0]
    regime_ok = excluded <= REGIME_LIMIT
    if not regime_ok:
        warnings.warn(f"{excluded:.1%} of paths left the small-separation regime", RegimeWarning,
                      stacklevel=2)
    if n < 2:
        raise ValidationError("fewer than two paths stayed in the small-separation regime")
    T = sample.steps * cfg.dt
    rates = np.log(sample.values[keep, 0] / r0_small) / T
    mean = float(rates.mean())
    se = float(rates.std(ddof=1) / np.sqrt(n))
    return LyapunovEstimate(mean, se, mean - Z95 * se, mean + Z95 * se, n, excluded, regime_ok)


@dataclass(frozen=True)
class StabilityProfile:
    """Tail minima of ``P(r_t <= eta)`` per initial separation."""

    eta: float
    initial: Tuple[float, ...]
    times: np.ndarray
    prob: np.ndarray
    tail_min: Tuple[float, ...]
    status: str = field(default="inconsistent")

    @property
    def consistent(self):
        return self.status == "consistent"


def stability_profile(spec, pairs, eta, time_grid, cfg, tail_fraction=0.5) -> StabilityProfile:
    """Finite-horizon surrogate of weak pointwise stability.

    For each initial separation the running minimum of ``P(r_t <= eta)`` over
    the last ``tail_fraction`` of the time grid is reported; a strictly
    positive minimum for every separation is labelled ``"consistent"``.
    """
    eta = float(_check_thresholds([eta])[0])
    pairs = tuple(float(r) for r in np.atleast_1d(pairs))
    if not pairs:
        raise ValidationError("at least one initial separation is required")
    times = np.sort(np.atleast_1d(np.asarray(time_grid, dtype=float)))
    start = int(np.floor((1.0 - tail_fraction) * times.size))
    start = min(start, times.size - 1)
    prob = []
    tail = []
    for r0 in pairs:
        est = estimate_sync_probability(spec, r0, [eta], times, cfg)
        p = est.prob[:, 0]
        prob.append(p)
        tail.append(float(p[start:].min()))
    status = "consistent" if all(t > 0 for t in tail) else "inconsistent"
    return StabilityProfile(eta, pairs, times, np.array(prob), tuple(tail), status)
