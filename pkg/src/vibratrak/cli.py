"""
Command line runner: ``vibratrak <mode> --config <path> [--out DIR] [--threads N] [--step-scale S]``.

Configuration files are JSON. Sweep values are nondimensional by default
(force ``F / (k_lin x_ref)``, frequency ``omega / omega0``, amplitude
``X / x_ref``); set ``"units": "dimensional"`` to give them in model units.
Data files (CSV and ``summary.json``) hold no timing information, so a
repeated run reproduces them byte for byte; wall times go to
``metadata.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys as _sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (AnalysisError, apriori_sweep, backbone_amplitudes,
                       compare_superharmonic, frc_curve)
from .continuation import ContinuationConfig, ContinuationError, compute_frc
from .hbm import NonConvergence
from .model import FORCE_KINDS, ModelError, SystemConfig, nondimensionalize
from .presets import PRESETS, preset_system
from .validation import CHECKS, run_checks
from .vprnm import VprnmError, vprnm_backbone

MODES = ("apriori", "frc", "vprnm", "compare", "bench", "validate")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

_FORCE_PARAMS = {
    "stiffening_duffing": ("alpha",),
    "softening_duffing": ("alpha",),
    "quintic": ("eta",),
    "unilateral_spring": ("k_nl",),
    "cubic_damping": ("gamma",),
    "softening_ii": ("k_t", "F_s", "chi", "beta"),
    "jenkins": ("k_t", "F_s"),
    "iwan": ("k_t", "F_s", "chi", "beta", "n_sliders"),
}
_FORCE_OPTIONAL = {"chi", "beta", "n_sliders"}
_CONT_KEYS = ("ds0", "ds_min", "ds_max", "max_points", "tol", "max_iter", "grow", "shrink",
              "fast_iters", "lam_scale", "eps", "max_turn")
_TOP_KEYS = ("mode", "system", "n", "units", "sweep", "continuation", "vprnm_continuation",
             "analysis", "checks", "output")
_SWEEP_KEYS = ("forces", "force_range", "omega_range", "amplitudes", "omega", "X3",
               "omega_window")
_ANALYSIS_KEYS = ("log_force", "normalized", "window_factor")
_REQUIRED = {
    "apriori": ("system", "n", "sweep.amplitudes"),
    "frc": ("system", "sweep.forces", "sweep.omega_range"),
    "vprnm": ("system", "n", "sweep.force_range|sweep.forces"),
    "compare": ("system", "n", "sweep.forces", "sweep.omega_range"),
    "bench": ("system", "n", "sweep.forces", "sweep.omega_range"),
    "validate": (),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


@dataclass
class RunConfig:
    """Validated run description (all sweep values dimensional)."""

    mode: str
    system: Optional[SystemConfig]
    n: Optional[int] = None
    forces: Optional[np.ndarray] = None
    force_range: Optional[tuple] = None
    omega_range: Optional[tuple] = None
    amplitudes: Optional[np.ndarray] = None
    omega: float = 1.0
    X3: Optional[float] = None
    omega_window: tuple = (0.75, 1.35)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    vprnm_continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    log_force: bool = True
    normalized: bool = False
    window_factor: float = 1.1
    checks: Optional[list] = None
    output_dir: Optional[str] = None
    echo: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

def _reject_unknown(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError("unknown key(s): " + ", ".join(where + k for k in unknown))


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer")
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive")
    return int(value) if integer else float(value)


def _pair(value, path, positive=True):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected [low, high]")
    lo, hi = (_number(v, f"{path}[{i}]", positive) for i, v in enumerate(value))
    if not lo < hi:
        raise ConfigError(f"{path}: low must be below high")
    return lo, hi


def _grid(value, path):
    # Either an explicit list or {"start", "stop", "count", "spacing"}.
    if isinstance(value, dict):
        _reject_unknown(value, ("start", "stop", "count", "spacing"), path)
        missing = [k for k in ("start", "stop", "count") if k not in value]
        if missing:
            raise ConfigError("missing key(s): " + ", ".join(f"{path}.{k}" for k in missing))
        start = _number(value["start"], f"{path}.start", positive=True)
        stop = _number(value["stop"], f"{path}.stop", positive=True)
        count = _number(value["count"], f"{path}.count", positive=True, integer=True)
        spacing = value.get("spacing", "log")
        if spacing not in ("log", "linear"):
            raise ConfigError(f"{path}.spacing: expected 'log' or 'linear'")
        return (np.geomspace if spacing == "log" else np.linspace)(start, stop, count)
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list or a start/stop/count object")
    if len(value) == 0:
        raise ConfigError(f"{path}: must not be empty")
    return np.array([_number(v, f"{path}[{i}]", positive=True) for i, v in enumerate(value)])


def _parse_system(doc):
    path = "system"
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    if "preset" in doc:
        _reject_unknown(doc, ("preset", "H", "Nt", "n_sliders"), path)
        name = doc["preset"]
        if name not in PRESETS:
            raise ConfigError(f"{path}.preset: unknown preset {name!r}; "
                              f"choose from {', '.join(PRESETS)}")
        kw = {}
        for key in ("H", "Nt", "n_sliders"):
            if key in doc:
                kw[key] = _number(doc[key], f"{path}.{key}", positive=True, integer=True)
        return preset_system(name, **kw)

    _reject_unknown(doc, ("m", "c", "k", "force", "H", "Nt", "x_ref"), path)
    missing = [k for k in ("m", "c", "k", "force") if k not in doc]
    if missing:
        raise ConfigError("missing key(s): " + ", ".join(f"{path}.{k}" for k in missing))
    force = None
    if doc["force"] is not None:
        fdoc = doc["force"]
        fpath = f"{path}.force"
        if not isinstance(fdoc, dict) or "kind" not in fdoc:
            raise ConfigError(f"{fpath}: expected an object with a 'kind'")
        kind = fdoc["kind"]
        if kind not in FORCE_KINDS:
            raise ConfigError(f"{fpath}.kind: unknown force {kind!r}; "
                              f"choose from {', '.join(FORCE_KINDS)}")
        params = _FORCE_PARAMS[kind]
        _reject_unknown(fdoc, ("kind",) + params, fpath)
        need = [p for p in params if p not in fdoc and p not in _FORCE_OPTIONAL]
        if need:
            raise ConfigError("missing key(s): " + ", ".join(f"{fpath}.{p}" for p in need))
        kw = {p: _number(fdoc[p], f"{fpath}.{p}", integer=(p == "n_sliders"))
              for p in params if p in fdoc}
        force = FORCE_KINDS[kind](**kw)
    kw = dict(m=_number(doc["m"], f"{path}.m"), c=_number(doc["c"], f"{path}.c"),
              k=_number(doc["k"], f"{path}.k"), force=force)
    if "H" in doc:
        kw["H"] = _number(doc["H"], f"{path}.H", positive=True, integer=True)
    kw["Nt"] = _number(doc.get("Nt", 1024), f"{path}.Nt", positive=True, integer=True)
    if "x_ref" in doc:
        kw["x_ref"] = _number(doc["x_ref"], f"{path}.x_ref", positive=True)
    return SystemConfig(**kw)


def _parse_continuation(doc, path):
    if doc is None:
        return ContinuationConfig()
    _reject_unknown(doc, _CONT_KEYS, path)
    kw = {}
    for key, value in doc.items():
        integer = key in ("max_points", "max_iter", "fast_iters")
        if key == "lam_scale" and value is None:
            kw[key] = None
            continue
        kw[key] = _number(value, f"{path}.{key}", positive=True, integer=integer)
    try:
        return ContinuationConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _has(doc, dotted):
    cur = doc
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return False
        cur = cur[part]
    return True


def parse_config(text):
    """Parse and validate a JSON run configuration.

    Raises
    ------
    ConfigError
        On malformed JSON, unknown keys, missing mode-required keys or
        invalid values; messages name the field path.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    _reject_unknown(doc, _TOP_KEYS, "")
    mode = doc.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
    missing = [req for req in _REQUIRED[mode]
               if not any(_has(doc, alt) for alt in req.split("|"))]
    if missing:
        raise ConfigError(f"missing key(s) for mode {mode}: " + ", ".join(missing))

    try:
        system = _parse_system(doc["system"]) if "system" in doc else None
    except (ModelError, TypeError) as exc:
        raise ConfigError(f"system: {exc}") from None
    cfg = RunConfig(mode=mode, system=system, echo=doc)

    if "n" in doc:
        cfg.n = _number(doc["n"], "n", positive=True, integer=True)
        if system is not None and not 2 <= cfg.n <= system.H:
            raise ConfigError(f"n: must lie in [2, H={system.H}]")
    units = doc.get("units", "nondimensional")
    if units not in ("nondimensional", "dimensional"):
        raise ConfigError("units: expected 'nondimensional' or 'dimensional'")

    sweep = doc.get("sweep", {})
    _reject_unknown(sweep, _SWEEP_KEYS, "sweep")
    if system is not None and units == "nondimensional":
        sc = nondimensionalize(system)
        f_unit, w_unit, x_unit = sc.force_unit, sc.omega0, sc.x_ref
    else:
        f_unit = w_unit = x_unit = 1.0
    if "forces" in sweep:
        cfg.forces = np.sort(_grid(sweep["forces"], "sweep.forces")) * f_unit
    if "force_range" in sweep:
        cfg.force_range = tuple(np.array(_pair(sweep["force_range"], "sweep.force_range"))
                                * f_unit)
    elif cfg.forces is not None:
        cfg.force_range = (float(cfg.forces[0]), float(cfg.forces[-1]))
    if "omega_range" in sweep:
        cfg.omega_range = tuple(np.array(_pair(sweep["omega_range"], "sweep.omega_range"))
                                * w_unit)
    if "amplitudes" in sweep:
        cfg.amplitudes = _grid(sweep["amplitudes"], "sweep.amplitudes") * x_unit
    if "omega" in sweep:
        cfg.omega = _number(sweep["omega"], "sweep.omega", positive=True) * w_unit
    elif system is not None:
        cfg.omega = w_unit
    if "X3" in sweep:
        cfg.X3 = _number(sweep["X3"], "sweep.X3", positive=True) * x_unit
    if "omega_window" in sweep:
        cfg.omega_window = _pair(sweep["omega_window"], "sweep.omega_window")
    if mode == "apriori" and system is not None and system.force is None:
        raise ConfigError("system.force: apriori mode needs a nonlinear force")

    cfg.continuation = _parse_continuation(doc.get("continuation"), "continuation")
    cfg.vprnm_continuation = (_parse_continuation(doc["vprnm_continuation"],
                                                  "vprnm_continuation")
                              if "vprnm_continuation" in doc else cfg.continuation)
    analysis = doc.get("analysis", {})
    _reject_unknown(analysis, _ANALYSIS_KEYS, "analysis")
    for key in ("log_force", "normalized"):
        if key in analysis:
            if not isinstance(analysis[key], bool):
                raise ConfigError(f"analysis.{key}: expected true or false")
            setattr(cfg, key, analysis[key])
    if "window_factor" in analysis:
        wf = _number(analysis["window_factor"], "analysis.window_factor", positive=True)
        if not wf > 1:
            raise ConfigError("analysis.window_factor: must exceed 1")
        cfg.window_factor = wf
    if "checks" in doc:
        if not isinstance(doc["checks"], list):
            raise ConfigError("checks: expected a list of check names")
        bad = [c for c in doc["checks"] if c not in CHECKS]
        if bad:
            raise ConfigError("checks: unknown check(s) " + ", ".join(map(str, bad)))
        cfg.checks = list(doc["checks"])
    out = doc.get("output", {})
    _reject_unknown(out, ("dir",), "output")
    cfg.output_dir = out.get("dir")
    return cfg


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else format(v, ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _state_header(H):
    cols = ["X0 [m]"]
    for k in range(1, H + 1):
        cols += [f"X{k}c [m]", f"X{k}s [m]"]
    return cols


def curve_header(H, extra=()):
    """Column names of FRC and backbone CSV files."""
    return (["force [N]", "frequency [rad/s]"] + _state_header(H)
            + ["total_amplitude [m]", "phase_n [rad]", "residual_norm [-]"] + list(extra))


def _phase(X, n):
    c, s = X[2 * n - 1], X[2 * n]
    return math.atan2(s, c) if (c or s) else float("nan")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# --------------------------------------------------------------------------
# Modes
# --------------------------------------------------------------------------

@dataclass
class ResultSet:
    """Files written and bookkeeping of one run."""

    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    validation_failed: bool = False


@contextmanager
def _pool(threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex.map
    else:
        yield map


def _frc_rows(sys, curve, n):
    for w, X, a, r in zip(curve.omega, curve.X, curve.amplitude, curve.residual_norm):
        yield [curve.F, w, *X, a, _phase(X, n) if n else float("nan"), r]


def _backbone_rows(sys, bb):
    amps = backbone_amplitudes(sys, bb)
    for p, a in zip(bb, amps):
        yield [p.F, p.omega, *p.X, a, p.phi_n, p.residual_norm, p.fbroad_magnitude,
               p.fbroad_phase, p.constraint]


_BACKBONE_EXTRA = ("fbroad_magnitude [N]", "fbroad_phase [rad]", "constraint [m]")


def _run_apriori(cfg, out, res):
    samples = apriori_sweep(cfg.system.force, cfg.n, cfg.amplitudes, cfg.omega, cfg.X3,
                            x_ref=cfg.system.x_ref, k_lin=cfg.system.k_lin,
                            Nt=cfg.system.Nt)
    header = ["X1 [m]", "X3 [m]", "n [-]", "Fc [N]", "Fs [N]", "magnitude [N]",
              "phi_broad [rad]", "phi_n [rad]", "X1_normalized [-]",
              "magnitude_normalized [-]"]
    rows = [[s.X1, s.X3, s.n, s.Fc, s.Fs, s.magnitude, s.phi_broad, s.phi_n,
             s.X1_normalized, s.magnitude_normalized] for s in samples]
    write_csv(out / "apriori.csv", header, rows)
    res.files.append("apriori.csv")
    res.summary["samples"] = len(samples)


def _run_frc_grid(cfg, out, res, mapper, write=True):
    sys = cfg.system

    def level(F):
        try:
            return F, compute_frc(sys, F, cfg.omega_range, cfg.continuation), None
        except (ContinuationError, NonConvergence, ValueError, ArithmeticError) as exc:
            return F, None, str(exc)

    total = 0
    levels = []
    for i, (F, br, err) in enumerate(mapper(level, cfg.forces)):
        if err is not None:
            res.failures.append({"force": float(F), "error": err})
            continue
        total += br.newton_iterations
        levels.append({"force": float(F), "points": len(br), "status": br.status,
                       "newton_iterations": br.newton_iterations})
        if br.status != "complete":
            res.failures.append({"force": float(F), "error": br.message})
        if write:
            name = f"frc_{i:03d}.csv"
            write_csv(out / name, curve_header(sys.H), _frc_rows(sys, frc_curve(sys, F, br),
                                                                  cfg.n))
            res.files.append(name)
    return total, levels


def _run_frc(cfg, out, res, mapper):
    total, levels = _run_frc_grid(cfg, out, res, mapper)
    res.summary.update(levels=levels, newton_iterations=total)


def _run_vprnm(cfg, out, res, mapper):
    bb = vprnm_backbone(cfg.system, cfg.n, cfg.force_range, cfg.vprnm_continuation,
                        log_force=cfg.log_force, omega_window=cfg.omega_window)
    write_csv(out / "backbone.csv", curve_header(cfg.system.H, _BACKBONE_EXTRA),
              _backbone_rows(cfg.system, bb))
    res.files.append("backbone.csv")
    if bb.status != "complete":
        res.failures.append({"stage": "backbone", "error": bb.message})
    res.summary.update(points=len(bb), status=bb.status,
                       newton_iterations=bb.newton_iterations)


def _run_compare(cfg, out, res, mapper):
    sys = cfg.system
    r = compare_superharmonic(sys, cfg.n, cfg.forces, cfg.omega_range, cfg.force_range,
                              cfg_frc=cfg.continuation, cfg_vprnm=cfg.vprnm_continuation,
                              log_force=cfg.log_force, normalized=cfg.normalized,
                              window_factor=cfg.window_factor,
                              omega_window=cfg.omega_window, mapper=mapper)
    write_csv(out / "peaks.csv",
              ["force [N]", "omega_peak [rad/s]", "X_super [m]", "X_nom [m]",
               "amplitude_n [m]", "phase_n [rad]", "omega_nom [rad/s]"],
              [[p.F, p.omega_peak, p.X_super, p.X_nom, p.amp_n, p.phi_n, p.omega_nom]
               for p in r.peaks])
    write_csv(out / "backbone.csv", curve_header(sys.H, _BACKBONE_EXTRA),
              _backbone_rows(sys, r.backbone))
    write_csv(out / "envelope.csv", ["force [N]", "lower [m]", "upper [m]"],
              zip(r.envelope.F, r.envelope.lower, r.envelope.upper))
    for i, c in enumerate(r.frcs):
        write_csv(out / f"frc_{i:03d}.csv", curve_header(sys.H), _frc_rows(sys, c, cfg.n))
        res.files.append(f"frc_{i:03d}.csv")
    res.files += ["peaks.csv", "backbone.csv", "envelope.csv"]
    res.failures += [{"force": F, "error": e} for F, e in r.failures]
    res.summary.update(
        accuracy_percent=r.accuracy, log_force=r.log_force, normalized=r.normalized,
        peaks=len(r.peaks), backbone_points=len(r.backbone),
        hbm_newton_iterations=r.hbm_newton_iterations,
        vprnm_newton_iterations=r.vprnm_newton_iterations,
        local_min_transition=_transition(r.peaks))


def _transition(peaks):
    # Force at which X_super - X_nom first turns negative after being positive.
    d = [(p.F, p.X_super - p.X_nom) for p in peaks]
    for (F0, a), (F1, b) in zip(d, d[1:]):
        if a > 0 >= b:
            return F1
    return None


def _run_bench(cfg, out, res, mapper):
    t0 = time.perf_counter()
    hbm_total, levels = _run_frc_grid(cfg, out, res, mapper, write=False)
    t_hbm = time.perf_counter() - t0
    t0 = time.perf_counter()
    bb = vprnm_backbone(cfg.system, cfg.n, cfg.force_range, cfg.continuation,
                        log_force=cfg.log_force, omega_window=cfg.omega_window)
    t_vp = time.perf_counter() - t0
    vp_total = bb.newton_iterations
    hbm_points = sum(lv["points"] for lv in levels)
    write_csv(out / "bench.csv",
              ["method [-]", "force_levels [-]", "points [-]", "newton_iterations [-]"],
              [["hbm", len(levels), hbm_points, hbm_total],
               ["vprnm", 1, len(bb), vp_total]])
    res.files.append("bench.csv")
    res.summary.update(hbm_newton_iterations=hbm_total, vprnm_newton_iterations=vp_total,
                       solve_ratio=hbm_total / vp_total if vp_total else None,
                       hbm_points=hbm_points, vprnm_points=len(bb))
    res.metadata.update(hbm_wall_time_s=t_hbm, vprnm_wall_time_s=t_vp,
                        wall_time_ratio=t_hbm / t_vp if t_vp > 0 else None)


def _run_validate(cfg, out, res, mapper):
    results = run_checks(cfg.checks)
    res.validation_failed = not all(r.passed for r in results)
    res.summary.update(passed=sum(r.passed for r in results), total=len(results),
                       checks=[{"name": r.name, "passed": r.passed, "detail": r.detail}
                               for r in results])
    res.metadata["check_seconds"] = {r.name: r.seconds for r in results}


_RUNNERS = {"apriori": lambda c, o, r, m: _run_apriori(c, o, r), "frc": _run_frc,
            "vprnm": _run_vprnm, "compare": _run_compare, "bench": _run_bench,
            "validate": _run_validate}


def run(cfg, out_dir=None, threads=1):
    """Execute a parsed configuration and write its result files.

    Returns
    -------
    ResultSet
    """
    out = Path(out_dir or cfg.output_dir or "vibratrak_out")
    out.mkdir(parents=True, exist_ok=True)
    res = ResultSet()
    t0 = time.perf_counter()
    with _pool(threads) as mapper:
        _RUNNERS[cfg.mode](cfg, out, res, mapper)
    res.summary["mode"] = cfg.mode
    res.summary["failures"] = res.failures
    _write_json(out / "summary.json", res.summary)
    res.metadata.update(version=__version__, config=cfg.echo, threads=threads,
                        wall_time_s=time.perf_counter() - t0, files=res.files)
    _write_json(out / "metadata.json", res.metadata)
    return res


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("VIBRATRAK_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"VIBRATRAK_THREADS: expected an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("VIBRATRAK_THREADS: must be at least 1")
        return n
    return 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="vibratrak",
                                     description="Superharmonic resonance tracking runs.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--threads", type=int, help="worker threads over force levels")
    parser.add_argument("--step-scale", type=float, default=1.0,
                        help="multiply continuation step sizes")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
        if cfg.mode != args.mode:
            raise ConfigError(f"mode: config says {cfg.mode!r} but {args.mode!r} was requested")
        if not args.step_scale > 0:
            raise ConfigError("--step-scale: must be positive")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        if args.step_scale != 1.0:
            cfg.continuation = cfg.continuation.scaled(args.step_scale)
            cfg.vprnm_continuation = cfg.vprnm_continuation.scaled(args.step_scale)
        threads = _threads(args.threads)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    try:
        res = run(cfg, args.out, threads)
    except (ContinuationError, NonConvergence, VprnmError, AnalysisError,
            ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    print(json.dumps(res.summary, default=_json_default, sort_keys=True))
    if res.validation_failed:
        return EXIT_VALIDATION
    if res.failures:
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
