"""Experiment runner: configuration files, studies, reports.

Config format: flat ``key = value`` lines, ``#`` comments, dotted section
prefixes (grid.nx, params.xi, solver.t_end).  Unknown keys, duplicate keys
and missing mandatory keys are hard errors; all seventeen model
coefficients, the grid, and the horizon are mandatory.

Commands:

    alarm-taxis-sim run <config> [--output DIR] [--quiet]
    alarm-taxis-sim audit <trajectory-dir> [--quiet]
    alarm-taxis-sim residuals <trajectory-dir> [--output DIR] [--quiet]

Exit status: 0 if every enabled audit passed, 1 on audit/report failure,
2 on solver abort, 3 on configuration errors.  ALARM_TAXIS_THREADS caps
parallelism over the independent runs of ladder studies (0 = sequential).

Study types: single, eps_ladder, grid_ladder (weak-form residual decay over
a space-time refinement ladder), mms (manufactured-solution convergence),
ode_compare (spatially constant run against the kinetics ODE oracle).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend, diagnostics as diag, mms as mmsmod, runio, solver, weakform
from .grid import Field, GridSpec, read_snapshot
from .model import Params, StateTriple, ode_oracle

EXIT_OK = 0
EXIT_AUDIT_FAIL = 1
EXIT_SOLVER_ABORT = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    """Configuration file problem; maps to exit status 3."""


@dataclass
class RunConfig:
    """Parsed union of grid, coefficients, solver settings, and study plan."""

    grid: GridSpec
    params: Params
    t_end: float
    cfl_safety: float
    regime: str
    eps: Optional[float]
    snapshot_interval: Optional[float]
    presmooth_steps: int
    study: dict
    init: dict
    audits: list
    source_path: str = ""


_SCALARS = {
    "grid.nx": int, "grid.ny": int, "grid.lx": float, "grid.ly": float,
    "solver.t_end": float, "solver.cfl_safety": float, "solver.regime": str,
    "solver.eps": float, "solver.snapshot_interval": float,
    "solver.presmooth_steps": int,
    "study.type": str, "study.mms_case": str, "study.family_n": int,
    "study.tolerance": float,
    "audits": str,
}
_PARAM_KEYS = ["d1", "d2", "d3", "xi", "chi",
               "lambda1", "lambda2", "lambda3", "mu1", "mu2", "mu3",
               "a1", "a2", "a3", "b1", "b2", "b3"]
for _k in _PARAM_KEYS:
    _SCALARS[f"params.{_k}"] = float
_LISTS = {"study.eps_values": float, "study.grids": int}

_INIT_KINDS = {
    "constant": {"value"},
    "cosine": {"offset", "amplitude", "kx", "ky"},
    "gaussian": {"offset", "amplitude", "cx", "cy", "width"},
    "snapshot": {"path"},
}
_MANDATORY = ["grid.nx", "grid.ny", "grid.lx", "grid.ly", "solver.t_end"] + [
    f"params.{k}" for k in _PARAM_KEYS]
_AUDIT_NAMES = ("l1", "sup", "mass")


def parse_config(path) -> RunConfig:
    """Strict parse of the flat key = value format."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    raw = {}
    lines_of = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {text!r}")
            key, _, val = text.partition("=")
            key = key.strip()
            val = val.strip()
            if not key or not val:
                raise ConfigError(f"{path}:{lineno}: empty key or value")
            if key in raw:
                raise ConfigError(
                    f"{path}:{lineno}: duplicate key {key!r} (first set on line {lines_of[key]})")
            raw[key] = val
            lines_of[key] = lineno

    missing = [k for k in _MANDATORY if k not in raw]
    if missing:
        raise ConfigError(f"{path}: missing mandatory keys: {', '.join(missing)}")

    parsed = {}
    init_raw = {"u": {}, "v": {}, "w": {}}
    for key, val in raw.items():
        where = f"{path}:{lines_of[key]}"
        if key in _SCALARS:
            typ = _SCALARS[key]
            try:
                parsed[key] = typ(val) if typ is not str else val
            except ValueError:
                raise ConfigError(f"{where}: cannot parse {key} value {val!r} as {typ.__name__}")
        elif key in _LISTS:
            typ = _LISTS[key]
            try:
                parsed[key] = [typ(tok.strip()) for tok in val.split(",") if tok.strip()]
            except ValueError:
                raise ConfigError(f"{where}: cannot parse list value {val!r} for {key}")
        elif key.startswith("init."):
            parts = key.split(".")
            if len(parts) != 3 or parts[1] not in ("u", "v", "w"):
                raise ConfigError(f"{where}: unknown key {key!r}")
            init_raw[parts[1]][parts[2]] = val
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")

    if parsed.get("params.xi", 0.0) < 0:
        raise ConfigError(
            f"{path}: params.xi = {parsed['params.xi']} rejected; the prey-taxis "
            "coefficient must satisfy xi >= 0")
    try:
        params = Params(**{k: parsed[f"params.{k}"] for k in _PARAM_KEYS})
    except (ValueError, AssertionError) as exc:
        raise ConfigError(f"{path}: invalid coefficients: {exc}")

    try:
        grid = GridSpec(parsed["grid.nx"], parsed["grid.ny"],
                        parsed["grid.lx"], parsed["grid.ly"])
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid grid: {exc}")

    init = {}
    for which, sub in init_raw.items():
        if not sub:
            init[which] = {"kind": "constant", "value": 0.0}
            continue
        kind = sub.pop("kind", None)
        if kind is None:
            raise ConfigError(f"{path}: init.{which} needs init.{which}.kind")
        if kind not in _INIT_KINDS:
            raise ConfigError(f"{path}: unknown init kind {kind!r} for init.{which}")
        allowed = _INIT_KINDS[kind]
        unknown = set(sub) - allowed
        if unknown:
            raise ConfigError(
                f"{path}: init.{which}.{unknown.pop()} is not a setting of kind {kind!r}")
        desc = {"kind": kind}
        for k, v in sub.items():
            if k == "path":
                desc[k] = v
            elif k in ("kx", "ky"):
                desc[k] = int(v)
            else:
                desc[k] = float(v)
        init[which] = desc

    for which, desc in init.items():
        if desc["kind"] == "snapshot":
            p = desc.get("path")
            if p is None:
                raise ConfigError(f"{path}: init.{which}.path is mandatory for snapshots")
            resolved = p if os.path.isabs(p) else os.path.join(os.path.dirname(os.path.abspath(path)), p)
            if not os.path.exists(resolved):
                raise ConfigError(f"{path}: referenced snapshot file does not exist: {p}")
            desc["path"] = resolved

    audits_raw = parsed.get("audits", "all")
    if audits_raw == "all":
        audits = list(_AUDIT_NAMES)
    elif audits_raw == "none":
        audits = []
    else:
        audits = [tok.strip() for tok in audits_raw.split(",") if tok.strip()]
        bad = set(audits) - set(_AUDIT_NAMES)
        if bad:
            raise ConfigError(f"{path}: unknown audit name(s): {', '.join(sorted(bad))}")

    study = {
        "type": parsed.get("study.type", "single"),
        "eps_values": parsed.get("study.eps_values"),
        "grids": parsed.get("study.grids"),
        "mms_case": parsed.get("study.mms_case"),
        "family_n": parsed.get("study.family_n", 27),
        "tolerance": parsed.get("study.tolerance", 1e-4),
    }
    if study["type"] not in ("single", "eps_ladder", "grid_ladder", "mms", "ode_compare"):
        raise ConfigError(f"{path}: unknown study.type {study['type']!r}")
    if study["type"] == "eps_ladder" and not study["eps_values"]:
        raise ConfigError(f"{path}: study.eps_values is mandatory for eps_ladder studies")
    if study["type"] == "mms" and study["mms_case"] not in ("diffusion", "full"):
        raise ConfigError(f"{path}: study.mms_case must be diffusion or full")
    if study["type"] in ("grid_ladder", "mms") and not study["grids"]:
        study["grids"] = [16, 32, 64]

    regime = parsed.get("solver.regime", "classical")
    eps = parsed.get("solver.eps")
    try:
        solver.SolverConfig(
            t_end=parsed["solver.t_end"],
            cfl_safety=parsed.get("solver.cfl_safety", 0.4),
            regime=regime, eps=eps,
            snapshot_interval=parsed.get("solver.snapshot_interval"),
            presmooth_steps=parsed.get("solver.presmooth_steps", 0),
        )
        if regime == "classical" and params.xi != 0.0:
            raise ConfigError(
                f"{path}: classical regime requires params.xi = 0, got {params.xi}")
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")

    return RunConfig(
        grid=grid, params=params,
        t_end=parsed["solver.t_end"],
        cfl_safety=parsed.get("solver.cfl_safety", 0.4),
        regime=regime, eps=eps,
        snapshot_interval=parsed.get("solver.snapshot_interval"),
        presmooth_steps=parsed.get("solver.presmooth_steps", 0),
        study=study, init=init, audits=audits, source_path=str(path),
    )


def build_initial(cfg: RunConfig, grid: Optional[GridSpec] = None) -> StateTriple:
    """Materialize the initial data descriptors on a grid."""
    g = grid or cfg.grid
    x, y = g.cell_centers()
    fields = {}
    for which in ("u", "v", "w"):
        desc = cfg.init[which]
        kind = desc["kind"]
        if kind == "constant":
            arr = np.full(g.shape, desc.get("value", 0.0))
        elif kind == "cosine":
            off = desc.get("offset", 1.0)
            amp = desc.get("amplitude", 0.5)
            kx = desc.get("kx", 1)
            ky = desc.get("ky", 1)
            arr = off + amp * np.cos(kx * math.pi * x / g.lx)
            if g.ny > 1:
                arr = off + amp * np.cos(kx * math.pi * x / g.lx) * np.cos(ky * math.pi * y / g.ly)
        elif kind == "gaussian":
            off = desc.get("offset", 0.0)
            amp = desc.get("amplitude", 1.0)
            cx = desc.get("cx", 0.5) * g.lx
            cy = desc.get("cy", 0.5) * g.ly
            width = desc.get("width", 0.1) * min(g.lx, g.ly)
            r2 = (x - cx) ** 2 + ((y - cy) ** 2 if g.ny > 1 else 0.0)
            arr = off + amp * np.exp(-r2 / (2.0 * width * width))
        else:
            f, _ = read_snapshot(desc["path"])
            if f.grid != g:
                raise ConfigError(
                    f"snapshot grid {f.grid} does not match run grid {g} for init.{which}")
            arr = f.values
        if (arr < 0).any():
            raise ConfigError(f"init.{which}: initial data must be nonnegative")
        fields[which] = Field(g, arr)
    return StateTriple(fields["u"], fields["v"], fields["w"], 0.0)


def _solver_config(cfg: RunConfig, mms_desc=None, snapshot_interval=None) -> solver.SolverConfig:
    return solver.SolverConfig(
        t_end=cfg.t_end, cfl_safety=cfg.cfl_safety, regime=cfg.regime, eps=cfg.eps,
        snapshot_interval=snapshot_interval if snapshot_interval is not None else cfg.snapshot_interval,
        mms=mms_desc, presmooth_steps=cfg.presmooth_steps,
    )


def _run_audits(traj, p: Params, which: list) -> list:
    reports = []
    if "l1" in which:
        reports.append(diag.audit_l1_bound(traj, p))
    if "sup" in which:
        reports.append(diag.audit_sup_bounds(traj, p))
    if "mass" in which:
        reports.append(diag.audit_mass_inequality(traj, p))
    return reports


def _emit(text: str, quiet: bool) -> None:
    if not quiet:
        print(text)


def _write(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _summary(outdir, payload: dict) -> None:
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _abort_bundle(outdir, exc: solver.SolverAbort) -> None:
    os.makedirs(outdir, exist_ok=True)
    tail = [{"t": m.t, "dt": m.dt, "sup_u": m.sup_u, "sup_v": m.sup_v,
             "sup_w": m.sup_w, "min_u": m.min_u, "min_v": m.min_v, "min_w": m.min_w,
             "guard_hits": m.guard_hits} for m in exc.monitor_tail]
    doc = {"status": "solver_abort", "reason": exc.reason, "t": exc.t,
           "step": exc.step_index, "cell": exc.cell, "species": exc.species,
           "monitor_tail": tail}
    with open(os.path.join(outdir, "abort.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _max_workers() -> int:
    k = int(os.environ.get("ALARM_TAXIS_THREADS", "0"))
    return max(k, 0)


def _ladder_map(worker, payloads):
    """Run ladder members, parallel when ALARM_TAXIS_THREADS >= 2."""
    k = _max_workers()
    if k >= 2 and len(payloads) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=min(k, len(payloads))) as ex:
            return list(ex.map(worker, payloads))
    return [worker(pl) for pl in payloads]


def _single_run(cfg: RunConfig, outdir: str, quiet: bool,
                write_snaps: bool = True) -> tuple:
    """Run one trajectory with audits; returns (exit_code, traj_or_None)."""
    init = build_initial(cfg)
    try:
        traj = solver.run(init, cfg.params, _solver_config(cfg))
    except solver.SolverAbort as exc:
        _abort_bundle(outdir, exc)
        _emit(f"solver abort: {exc}", quiet)
        return EXIT_SOLVER_ABORT, None
    os.makedirs(outdir, exist_ok=True)
    runio.save_trajectory(outdir, traj, write_snapshots=write_snaps)
    reports = _run_audits(traj, cfg.params, cfg.audits)
    text = "\n\n".join(r.render_text() for r in reports) if reports else "(no audits enabled)"
    _write(os.path.join(outdir, "audit_report.txt"), text)
    _emit(text, quiet)
    ok = all(r.passed for r in reports)
    _summary(outdir, {
        "status": "ok" if ok else "audit_failed",
        "audits": {r.title: r.passed for r in reports},
        "energy_finals": diag.energy_series(traj).finals(),
        "n_steps": len(traj.dt_history),
        "max_dt": max(traj.dt_history) if traj.dt_history else 0.0,
        "backend": traj.backend_name,
    })
    return (EXIT_OK if ok else EXIT_AUDIT_FAIL), traj


def _eps_worker(payload):
    cfg_path, eps, outdir = payload
    cfg = parse_config(cfg_path)
    cfg = RunConfig(**{**cfg.__dict__, "regime": "regularized", "eps": eps})
    code, traj = _single_run(cfg, outdir, quiet=True)
    finals = diag.energy_series(traj).finals() if traj is not None else None
    return code, eps, finals


def _study_eps_ladder(cfg: RunConfig, outdir: str, quiet: bool) -> int:
    eps_values = cfg.study["eps_values"]
    payloads = [(cfg.source_path, e, os.path.join(outdir, f"eps_{e:g}")) for e in eps_values]
    results = _ladder_map(_eps_worker, payloads)
    codes = [r[0] for r in results]
    if any(c == EXIT_SOLVER_ABORT for c in codes):
        return EXIT_SOLVER_ABORT
    finals = [r[2] for r in results]
    labels = [f"eps={r[1]:g}" for r in results]
    rep = diag.audit_energy_uniformity(finals, labels=labels)
    lines = [rep.render_text(), "", "final cumulative energies per run:"]
    for lab, fin in zip(labels, finals):
        lines.append(f"  {lab}: " + ", ".join(f"{k}={v:.6e}" for k, v in fin.items()))
    text = "\n".join(lines)
    _write(os.path.join(outdir, "eps_ladder_report.txt"), text)
    _emit(text, quiet)
    ok = rep.passed and all(c == EXIT_OK for c in codes)
    _summary(outdir, {"status": "ok" if ok else "audit_failed",
                      "uniformity_passed": rep.passed,
                      "run_codes": codes,
                      "eps_values": eps_values})
    return EXIT_OK if ok else EXIT_AUDIT_FAIL


def _grid_worker(payload):
    cfg_path, nx, interval, outdir = payload
    cfg = parse_config(cfg_path)
    g0 = cfg.grid
    grid = GridSpec(nx, nx if g0.ny > 1 else 1, g0.lx, g0.ly)
    cfg = RunConfig(**{**cfg.__dict__, "grid": grid, "snapshot_interval": interval})
    init = build_initial(cfg)
    try:
        traj = solver.run(init, cfg.params, _solver_config(cfg, snapshot_interval=interval))
    except solver.SolverAbort as exc:
        _abort_bundle(outdir, exc)
        return EXIT_SOLVER_ABORT, nx, None
    os.makedirs(outdir, exist_ok=True)
    runio.save_trajectory(outdir, traj, write_snapshots=False)
    family = weakform.make_test_family(grid, cfg.t_end, cfg.study["family_n"])
    report = weakform.residual_table(traj, cfg.params, family, tol=cfg.study["tolerance"])
    _write(os.path.join(outdir, "residual_report.txt"), report.render_text())
    return EXIT_OK, nx, (report.max_wr_u, report.max_wr_v, report.max_defect_abs,
                         report.min_defect)


def _study_grid_ladder(cfg: RunConfig, outdir: str, quiet: bool) -> int:
    grids = cfg.study["grids"]
    base_interval = cfg.snapshot_interval or (cfg.t_end / 24.0)
    payloads = []
    for nx in grids:
        interval = base_interval * grids[0] / nx
        payloads.append((cfg.source_path, nx, interval, os.path.join(outdir, f"grid_{nx}")))
    results = _ladder_map(_grid_worker, payloads)
    if any(r[0] == EXIT_SOLVER_ABORT for r in results):
        return EXIT_SOLVER_ABORT
    hs = np.log([cfg.grid.lx / r[1] for r in results])
    names = ("max|wr_u|", "max|wr_v|", "max|defect|")
    lines = [f"== weak-form residual refinement ladder ==",
             f"{'grid':>8} {'max|wr_u|':>13} {'max|wr_v|':>13} {'max|defect|':>13} {'min defect':>13}"]
    for _, nx, vals in results:
        lines.append(f"{nx:>6}^2 {vals[0]:>13.4e} {vals[1]:>13.4e} {vals[2]:>13.4e} {vals[3]:>13.4e}")
    slopes = {}
    ok = True
    for j, name in enumerate(names):
        es = np.log([r[2][j] for r in results])
        slope = float(np.polyfit(hs, es, 1)[0])
        slopes[name] = slope
        ok = ok and slope >= 0.9
        lines.append(f"observed order of {name}: {slope:.3f} (expected >= 0.9)")
    # the ladder is judged on decay; the defect floor applies per run and is
    # reported for the finest level
    min_defect = results[-1][2][3]
    lines.append(f"min supersolution defect at the finest level: {min_defect:.4e}")
    text = "\n".join(lines)
    _write(os.path.join(outdir, "residual_ladder_report.txt"), text)
    _emit(text, quiet)
    _summary(outdir, {"status": "ok" if ok else "audit_failed", "orders": slopes,
                      "min_defect": min_defect})
    return EXIT_OK if ok else EXIT_AUDIT_FAIL


def _study_mms(cfg: RunConfig, outdir: str, quiet: bool) -> int:
    case = cfg.study["mms_case"]
    two_d = cfg.grid.ny > 1
    if case == "diffusion":
        factory = lambda lx, ly: mmsmod.diffusion_case(cfg.params, lx, ly, two_d=two_d)
        expected = 1.9
    else:
        factory = lambda lx, ly: mmsmod.full_case(cfg.params, lx, ly, two_d=two_d)
        expected = 0.9
    report = mmsmod.mms_run(factory, cfg.params, _solver_config(cfg),
                            cfg.study["grids"], lx=cfg.grid.lx, ly=cfg.grid.ly,
                            expected_order=expected)
    os.makedirs(outdir, exist_ok=True)
    text = report.render_text()
    _write(os.path.join(outdir, "mms_report.txt"), text)
    _emit(text, quiet)
    _summary(outdir, {"status": "ok" if report.passed else "audit_failed",
                      "case": case, "errors": report.errors, "orders": report.orders,
                      "slope": report.slope, "monotone": report.monotone})
    return EXIT_OK if report.passed else EXIT_AUDIT_FAIL


def _study_ode_compare(cfg: RunConfig, outdir: str, quiet: bool) -> int:
    for which in ("u", "v", "w"):
        if cfg.init[which]["kind"] != "constant":
            raise ConfigError("ode_compare study requires constant initial data")
    code, traj = _single_run(cfg, outdir, quiet=True, write_snaps=False)
    if traj is None:
        return code
    times = traj.snapshot_times()
    y0 = [cfg.init[k].get("value", 0.0) for k in ("u", "v", "w")]
    ref = ode_oracle(cfg.params, y0, times)
    dev = 0.0
    for k, s in enumerate(traj.snapshots):
        for j, f in enumerate((s.u, s.v, s.w)):
            dev = max(dev, float(np.abs(f.values - ref[j, k]).max()))
    tol = cfg.study["tolerance"]
    ok = dev <= tol
    max_dt = max(traj.dt_history) if traj.dt_history else 0.0
    text = (f"== kinetics ODE comparison ==\n"
            f"max deviation from adaptive high-order oracle: {dev:.6e}\n"
            f"largest accepted dt: {max_dt:.6e}\n"
            f"tolerance {tol:g}: {'pass' if ok else 'FAIL'}")
    _write(os.path.join(outdir, "ode_compare_report.txt"), text)
    _emit(text, quiet)
    _summary(outdir, {"status": "ok" if ok else "audit_failed",
                      "max_deviation": dev, "max_dt": max_dt, "tolerance": tol})
    return EXIT_OK if ok else EXIT_AUDIT_FAIL


def run_study(cfg: RunConfig, outdir: str, quiet: bool = False) -> int:
    """Execute the configured study; writes artifacts, returns the exit status."""
    os.makedirs(outdir, exist_ok=True)
    kind = cfg.study["type"]
    if kind == "single":
        code, _ = _single_run(cfg, outdir, quiet)
        return code
    if kind == "eps_ladder":
        return _study_eps_ladder(cfg, outdir, quiet)
    if kind == "grid_ladder":
        return _study_grid_ladder(cfg, outdir, quiet)
    if kind == "mms":
        return _study_mms(cfg, outdir, quiet)
    if kind == "ode_compare":
        return _study_ode_compare(cfg, outdir, quiet)
    raise ConfigError(f"unknown study type {kind!r}")


def _cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = args.output or (os.path.splitext(os.path.basename(args.config))[0] + "_out")
    try:
        return run_study(cfg, outdir, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except solver.SolverAbort as exc:
        _abort_bundle(outdir, exc)
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ABORT


def _cmd_audit(args) -> int:
    try:
        view = runio.load_trajectory(args.rundir, load_snapshots=False)
    except (OSError, ValueError) as exc:
        print(f"cannot load trajectory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    reports = _run_audits(view, view.params, list(_AUDIT_NAMES))
    text = "\n\n".join(r.render_text() for r in reports)
    if not args.quiet:
        print(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_AUDIT_FAIL


def _cmd_residuals(args) -> int:
    try:
        view = runio.load_trajectory(args.rundir, load_snapshots=True)
    except (OSError, ValueError) as exc:
        print(f"cannot load trajectory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(view.snapshots) < 3:
        print("trajectory has too few snapshots for residual evaluation", file=sys.stderr)
        return EXIT_CONFIG
    family = weakform.make_test_family(view.grid, float(view.config.t_end), args.family_n)
    try:
        report = weakform.residual_table(view, view.params, family, tol=args.tolerance)
    except ValueError as exc:
        print(f"cannot evaluate residuals on this trajectory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.render_text()
    if not args.quiet:
        print(text)
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        _write(os.path.join(args.output, "residual_report.txt"), text)
    return EXIT_OK if report.passed else EXIT_AUDIT_FAIL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="alarm-taxis-sim",
        description="Finite-volume alarm-taxis predator-prey simulator and estimate auditor",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the study described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output", help="output directory (default: <config>_out)")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_audit = sub.add_parser("audit", help="re-run the bound audits on a saved trajectory")
    p_audit.add_argument("rundir")
    p_audit.add_argument("--quiet", action="store_true")
    p_audit.set_defaults(fn=_cmd_audit)

    p_res = sub.add_parser("residuals", help="evaluate weak-form residuals on a saved trajectory")
    p_res.add_argument("rundir")
    p_res.add_argument("--output", help="also write the report into this directory")
    p_res.add_argument("--quiet", action="store_true")
    p_res.add_argument("--family-n", type=int, default=27, dest="family_n")
    p_res.add_argument("--tolerance", type=float, default=1e-4)
    p_res.set_defaults(fn=_cmd_residuals)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
