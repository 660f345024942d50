"""Command-line front end: ``isoflow classify|simulate|spectrum|sweep``.

Exit codes: 0 success, 2 invalid config or usage, 3 precondition violated
(degenerate model, verdict requested for an undamped IOUF), 4 numeric
non-convergence or any other failure.
"""

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import iouf, sphere
from .diffusion import ERGODIC, SYNCHRONIZES, boundary_classify, synchronization_verdict
from .errors import (
    DegenerateModelError,
    DomainError,
    IsoflowError,
    PreconditionError,
    ValidationError,
)
from .expr import ExpressionDiffusion
from .montecarlo import SimConfig, estimate_sync_probability
from .schema import (
    CLASSIFY_REPORT,
    CONFIG,
    SCHEMA_VERSION,
    SIMULATE_HEADER,
    SIMULATE_REPORT,
    SPECTRUM_REPORT,
    SWEEP_HEADER,
    jsonable,
)

log = logging.getLogger("isoflow")

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("classify", "simulate", "spectrum", "sweep")


class ConfigError(IsoflowError):
    """The run config is malformed or unusable."""


# -- config ---------------------------------------------------------------------------


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid UTF-8 JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {where}: {exc.message}") from exc
    return cfg


def model_kind(cfg):
    return next(k for k in ("sphere", "iouf", "diffusion") if k in cfg)


def build_model(kind, block):
    """Domain object for a model block: SphereModel, OUFlowModel or ExpressionDiffusion."""
    if kind == "sphere":
        return sphere.SphereModel(block["d"], tuple(block.get("a", ())), tuple(block.get("b", ())),
                                  label=block.get("label", ""))
    if kind == "iouf":
        return iouf.OUFlowModel(block["d"], block["c"], iouf.gaussian_covariance())
    R = block.get("R", "inf")
    R = float("inf") if R == "inf" else float(R)
    return ExpressionDiffusion(block["drift"], block["diffusion"], R, block.get("reference"))


def describe(kind, model, block):
    if kind == "diffusion":
        return block.get("label") or f"diffusion b={model.drift} sigma={model.diffusion} R={model.R:g}"
    return model.describe()


def diffusion_spec(kind, model, block):
    if kind == "sphere":
        return sphere.distance_diffusion(model)
    if kind == "iouf":
        return iouf.distance_diffusion(model)
    return model.spec(label=block.get("label", ""))


def resolve_threads(arg, cfg_threads=None):
    env = os.environ.get("ISOFLOW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"ISOFLOW_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("ISOFLOW_THREADS must be >= 1")
        return n
    if arg is not None:
        return arg
    return cfg_threads or 1


# -- computations ---------------------------------------------------------------------


def _boundary_dict(rep):
    return {
        "boundary": rep.boundary,
        "scale_limit": rep.scale_limit,
        "accessible": bool(rep.accessible),
        "speed_mass_near": rep.speed_mass_near,
        "scale_exponent": rep.scale_exponent,
        "feller_integral": rep.feller_integral,
    }


def classify_model(kind, model, block):
    """Verdict data common to ``classify``, ``simulate`` and ``sweep``."""
    out = {}
    if kind == "sphere":
        rep = sphere.classify(model)
        out.update(
            lambda1=rep.lambda1,
            spectrum=list(rep.spectrum),
            gamma1=rep.gamma1,
            boundary_coefficients={"alpha1": rep.alpha1, "alpha1_prime": rep.alpha1_prime,
                                   "beta1": rep.beta1},
            predicted=rep.predicted,
        )
        verdict, bounds = rep.verdict, rep.boundaries
    elif kind == "iouf":
        rep = iouf.classify(model)
        out.update(lambda1=rep.lambda1, lambda1_c0=rep.lambda1_c0, predicted=rep.predicted)
        verdict, bounds = rep.verdict, rep.boundaries
    else:
        spec = model.spec(label=block.get("label", ""))
        verdict = synchronization_verdict(spec)
        bounds = (boundary_classify(spec, "zero"), boundary_classify(spec, "R"))
        out["lambda1"] = None
    out.update(
        verdict=verdict.verdict,
        assumptions_ok=bool(verdict.assumptions_ok),
        speed_mass=verdict.speed_total,
        boundaries=[_boundary_dict(b) for b in bounds],
        evidence=dict(verdict.evidence),
    )
    return out


def _header(command, kind, block, desc):
    return {"schema": SCHEMA_VERSION, "command": command, "model": {"kind": kind, **block},
            "description": desc}


def cmd_classify(cfg, out_dir, threads):
    kind = model_kind(cfg)
    block = cfg[kind]
    model = build_model(kind, block)
    if kind == "iouf" and model.c == 0:
        raise PreconditionError(f"no verdict for c=0: {iouf.NO_INVARIANT_MEASURE}")
    t0 = time.perf_counter()
    report = _header("classify", kind, block, describe(kind, model, block))
    report.update(classify_model(kind, model, block))
    report["wall_time_s"] = time.perf_counter() - t0
    write_json(out_dir / "classify.json", report, CLASSIFY_REPORT)
    log.info("%s: %s", report["description"], report["verdict"])
    return report


def cmd_spectrum(cfg, out_dir, threads):
    kind = model_kind(cfg)
    block = cfg[kind]
    if kind == "diffusion":
        raise ConfigError("spectrum needs a sphere or iouf model")
    model = build_model(kind, block)
    t0 = time.perf_counter()
    report = _header("spectrum", kind, block, describe(kind, model, block))
    if kind == "sphere":
        sphere.check_nondegenerate(model)
        alpha1, alpha1p, beta1 = sphere.boundary_coefficients(model)
        spec = sphere.lyapunov_spectrum(model)
        report.update(lambda1=spec[0], spectrum=spec, gamma1=sphere.gamma1(model),
                      boundary_coefficients={"alpha1": alpha1, "alpha1_prime": alpha1p, "beta1": beta1})
    else:
        top = iouf.top_lyapunov(model)
        shifted = iouf.top_lyapunov(iouf.OUFlowModel(model.d, 0.0, model.covariance)).value - model.c
        report.update(lambda1=top.value, spectrum=[top.value], lambda1_c0=top.without_damping,
                      c=model.c, shift_identity=bool(abs(shifted - top.value) <= 1e-12 * max(1.0, abs(top.value))))
    report["wall_time_s"] = time.perf_counter() - t0
    write_json(out_dir / "spectrum.json", report, SPECTRUM_REPORT)
    return report


def mc_trend(prob, half):
    """``"non-decreasing"`` if successive estimates never drop by more than the
    summed CI half-widths, ``"decreasing"`` otherwise; ``None`` for one time."""
    if len(prob) < 2:
        return None
    drops = np.diff(prob) < -(half[1:] + half[:-1])
    return "decreasing" if drops.any() else "non-decreasing"


def concordance(verdict, trend, ci_hi_last):
    """Synchronizes wants a non-decreasing trend; Ergodic a final estimate below 1."""
    if verdict == SYNCHRONIZES:
        return None if trend is None else trend == "non-decreasing"
    if verdict == ERGODIC:
        return bool(ci_hi_last < 1.0)
    return None


def cmd_simulate(cfg, out_dir, threads):
    kind = model_kind(cfg)
    block = cfg[kind]
    sim = cfg.get("sim")
    if sim is None:
        raise ConfigError("simulate needs a 'sim' block")
    model = build_model(kind, block)
    t0 = time.perf_counter()
    spec = diffusion_spec(kind, model, block)
    verdict = classify_model(kind, model, block)["verdict"]
    sc = SimConfig(
        dt=float(sim["dt"]), horizon=float(sim["horizon"]), paths=int(sim["paths"]), seed=int(sim["seed"]),
        floor=sim.get("floor"), r_switch=sim.get("r_switch"), ceil_eps=float(sim.get("ceil_eps", 1e-6)),
        threads=resolve_threads(threads, sim.get("threads")), max_substeps=int(sim.get("max_substeps", 1 << 16)),
    )
    times = sorted(float(t) for t in sim.get("times", [sim["horizon"]]))
    est = estimate_sync_probability(spec, float(sim["r0"]), [float(e) for e in sim["eta"]], times, sc)
    rows = est.rows()
    csv_path = out_dir / "simulate.csv"
    write_csv(csv_path, SIMULATE_HEADER,
              [(t, e, p, lo, hi, est.paths_used, est.seed) for t, e, p, lo, hi in rows])
    j = int(np.argmax(est.thresholds))
    order = np.argsort(est.times)
    trend = mc_trend(est.prob[order, j], est.ci_halfwidth[order, j])
    report = _header("simulate", kind, block, describe(kind, model, block))
    report.update(
        verdict=verdict,
        sim=sim,
        csv=csv_path.name,
        rows=len(rows),
        paths_used=est.paths_used,
        seed=est.seed,
        frozen_fraction=est.frozen_fraction,
        clamp_fraction=est.clamp_fraction,
        trend=trend,
        concordant=concordance(verdict, trend, float(est.ci_hi[order[-1], j])),
        wall_time_s=time.perf_counter() - t0,
    )
    write_json(out_dir / "simulate.json", report, SIMULATE_REPORT)
    return report


def _with_parameter(kind, block, name, value):
    block = copy.deepcopy(block)
    if name in ("c", "d"):
        if kind == "sphere" and name == "c":
            raise ConfigError("sphere models have no parameter 'c'")
        if name == "d" and not float(value).is_integer():
            raise ConfigError(f"d must be an integer, got {value}")
        block[name] = int(value) if name == "d" else float(value)
        return block
    if kind != "sphere":
        raise ConfigError(f"parameter {name!r} is only defined for sphere models")
    key, idx = name[0], int(name[1:]) - 1
    coefs = list(block.get(key, []))
    coefs += [0.0] * (idx + 1 - len(coefs))
    coefs[idx] = float(value)
    block[key] = coefs
    return block


def _speed_mass_class(total):
    if np.isnan(total):
        return "undecided"
    return "finite" if np.isfinite(total) else "infinite"


def _sweep_point(kind, block):
    model = build_model(kind, block)
    res = classify_model(kind, model, block)
    return res["lambda1"], res.get("gamma1"), res["verdict"], _speed_mass_class(res["speed_mass"])


def cmd_sweep(cfg, out_dir, threads):
    kind = model_kind(cfg)
    if kind == "diffusion":
        raise ConfigError("sweep needs a sphere or iouf model")
    sw = cfg.get("sweep")
    if sw is None:
        raise ConfigError("sweep needs a 'sweep' block")
    if not sw["values"]:
        raise ConfigError("sweep grid is empty")
    name = sw["parameter"]
    blocks = [_with_parameter(kind, cfg[kind], name, v) for v in sw["values"]]
    # validate every point before any work starts
    for b in blocks:
        build_model(kind, b)
    n = min(resolve_threads(threads), len(blocks))
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            results = list(pool.map(lambda b: _sweep_point(kind, b), blocks))
    else:
        results = [_sweep_point(kind, b) for b in blocks]
    rows = []
    for v, (lam, g1, verdict, mass) in zip(sw["values"], results):
        rows.append((name, float(v), lam, "" if g1 is None else g1, verdict, mass))
    write_csv(out_dir / "sweep.csv", SWEEP_HEADER, rows)
    return rows


# -- output ---------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_json(path, report, schema):
    doc = jsonable(report)
    jsonschema.validate(doc, schema)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


# -- entry point ----------------------------------------------------------------------

HANDLERS = {"classify": cmd_classify, "simulate": cmd_simulate, "spectrum": cmd_spectrum, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="isoflow", description="Weak synchronization diagnostics for isotropic flows.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="UTF-8 JSON run config")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (ISOFLOW_THREADS overrides)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def exit_code(exc):
    """Map an exception to the documented exit code."""
    if isinstance(exc, (DegenerateModelError, PreconditionError)):
        return EXIT_PRECONDITION
    if isinstance(exc, (ConfigError, ValidationError, DomainError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        if cfg.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
        if not os.access(out_dir, os.W_OK):
            raise ConfigError(f"output directory {out_dir} is not writable")
        HANDLERS[args.command](cfg, out_dir, args.threads)
    except Exception as exc:  # noqa: BLE001  every failure maps to a documented code
        code = exit_code(exc)
        print(f"isoflow: error: {exc}", file=sys.stderr)
        if code == EXIT_NUMERIC and not isinstance(exc, IsoflowError):
            log.debug("unexpected failure", exc_info=True)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
