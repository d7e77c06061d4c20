"""On-disk run format: series CSV, manifest, snapshots.

Layout of a trajectory directory:

    run_manifest.json   grid, coefficients, regime, bound constants, versions
    series.csv          one row per accepted step (columns below)
    snapshots/          u_0000.txt, v_0000.txt, w_0000.txt, ... per saved time

Series columns are fixed and versioned: t, dt, mass_u, mass_v, mass_w,
comb_mass, sup_u, sup_v, sup_w, l2_u, l2_v, l2_w, grad_u_sq, grad_v_sq,
grad_uv_sq, logw_grad_sq, cum_lap_u_sq, gn_ratio_u, then the bound-margin
columns, then rhs_v_l65, cum_h_int and guard_hits (needed to re-run audits
from disk).  Floats are written with shortest round-trip precision, so two
runs of the same configuration produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import grid as gridmod
from .diagnostics import BoundConstants, MonitorRecord
from .grid import GridSpec
from .model import Params, StateTriple

SERIES_VERSION = 1

_BASE_COLUMNS = [
    "t", "dt", "mass_u", "mass_v", "mass_w", "comb_mass",
    "sup_u", "sup_v", "sup_w", "l2_u", "l2_v", "l2_w",
    "grad_u_sq", "grad_v_sq", "grad_uv_sq", "logw_grad_sq",
    "cum_lap_u_sq", "gn_ratio_u",
]
_MARGIN_COLUMNS = ["margin_l1", "margin_l2l2", "margin_sup_u", "margin_sup_v",
                   "margin_sup_w", "margin_mass"]
_EXTRA_COLUMNS = ["rhs_v_l65", "cum_h_int", "guard_hits"]
SERIES_COLUMNS = _BASE_COLUMNS + _MARGIN_COLUMNS + _EXTRA_COLUMNS

_MARGIN_KEYS = {"margin_l1": "l1", "margin_l2l2": "l2l2", "margin_sup_u": "sup_u",
                "margin_sup_v": "sup_v", "margin_sup_w": "sup_w", "margin_mass": "mass"}


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def write_series(path, monitors) -> None:
    lines = [f"# alarm-taxis series v{SERIES_VERSION}", ",".join(SERIES_COLUMNS)]
    for m in monitors:
        vals = [_fmt(getattr(m, c)) for c in _BASE_COLUMNS]
        for col in _MARGIN_COLUMNS:
            vals.append(_fmt(m.bound_margins.get(_MARGIN_KEYS[col], math.nan)))
        vals.append(_fmt(m.rhs_v_l65))
        vals.append(_fmt(m.cum_h_int))
        vals.append(str(m.guard_hits))
        lines.append(",".join(vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series(path):
    """Rebuild MonitorRecords from a series.csv."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# alarm-taxis series"):
            raise ValueError(f"{path}: not an alarm-taxis series file")
        cols = fh.readline().strip().split(",")
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = dict(zip(cols, line.split(",")))
            margins = {}
            for col, key in _MARGIN_KEYS.items():
                if col in vals:
                    x = float(vals[col])
                    if not math.isnan(x):
                        margins[key] = x
            records.append(MonitorRecord(
                t=float(vals["t"]), dt=float(vals["dt"]),
                mass_u=float(vals["mass_u"]), mass_v=float(vals["mass_v"]),
                mass_w=float(vals["mass_w"]), comb_mass=float(vals["comb_mass"]),
                sup_u=float(vals["sup_u"]), sup_v=float(vals["sup_v"]),
                sup_w=float(vals["sup_w"]), l2_u=float(vals["l2_u"]),
                l2_v=float(vals["l2_v"]), l2_w=float(vals["l2_w"]),
                grad_u_sq=float(vals["grad_u_sq"]), grad_v_sq=float(vals["grad_v_sq"]),
                grad_uv_sq=float(vals["grad_uv_sq"]), logw_grad_sq=float(vals["logw_grad_sq"]),
                cum_lap_u_sq=float(vals["cum_lap_u_sq"]), gn_ratio_u=float(vals["gn_ratio_u"]),
                rhs_v_l65=float(vals["rhs_v_l65"]), cum_h_int=float(vals["cum_h_int"]),
                lap_u_sq=math.nan, min_u=math.nan, min_v=math.nan, min_w=math.nan,
                guard_hits=int(vals["guard_hits"]), bound_margins=margins,
            ))
    return records


def write_manifest(path, traj, extra=None) -> None:
    g = traj.grid
    p = traj.params
    bc = traj.bounds
    doc = {
        "format": "alarm-taxis run",
        "series_version": SERIES_VERSION,
        "grid": {"nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly},
        "params": {k: getattr(p, k) for k in (
            "d1", "d2", "d3", "xi", "chi",
            "lambda1", "lambda2", "lambda3", "mu1", "mu2", "mu3",
            "a1", "a2", "a3", "b1", "b2", "b3")},
        "eta1": p.eta1,
        "eta2": p.eta2,
        "regime": traj.regime,
        "eps": traj.eps,
        "t_end": traj.config.t_end,
        "cfl_safety": traj.config.cfl_safety,
        "snapshot_interval": traj.config.snapshot_interval,
        "presmooth_steps": traj.presmooth_steps,
        "backend": traj.backend_name,
        "bounds": {
            "l1_bound": bc.l1_bound, "comb_mass0": bc.comb_mass0,
            "mass_w0": bc.mass_w0, "u_bar": bc.u_bar,
            "v_bar": bc.v_bar, "w_bar": bc.w_bar,
            "lam_max": bc.lam_max, "mu_min": bc.mu_min,
        },
        "n_steps": len(traj.dt_history),
        "n_snapshots": len(traj.snapshots),
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_trajectory(outdir, traj, write_snapshots: bool = True, extra=None) -> None:
    os.makedirs(outdir, exist_ok=True)
    write_manifest(os.path.join(outdir, "run_manifest.json"), traj, extra=extra)
    write_series(os.path.join(outdir, "series.csv"), traj.monitors)
    if write_snapshots:
        snapdir = os.path.join(outdir, "snapshots")
        os.makedirs(snapdir, exist_ok=True)
        for k, s in enumerate(traj.snapshots):
            for name, f in (("u", s.u), ("v", s.v), ("w", s.w)):
                gridmod.write_snapshot(os.path.join(snapdir, f"{name}_{k:04d}.txt"), f, s.t)


@dataclass
class TrajectoryView:
    """Trajectory re-read from disk; enough for audits and residuals."""

    grid: GridSpec
    params: Params
    regime: str
    eps: object
    bounds: BoundConstants
    monitors: list
    snapshots: list
    config: object
    backend_name: str = "disk"

    def snapshot_times(self):
        return np.array([s.t for s in self.snapshots])

    def monitor_series(self, name):
        return np.array([getattr(m, name) for m in self.monitors])


@dataclass
class _CfgView:
    t_end: float
    snapshot_interval: object


def load_trajectory(rundir, load_snapshots: bool = True) -> TrajectoryView:
    with open(os.path.join(rundir, "run_manifest.json")) as fh:
        doc = json.load(fh)
    g = GridSpec(**doc["grid"])
    p = Params(**doc["params"])
    b = doc["bounds"]
    bounds = BoundConstants(
        l1_bound=b["l1_bound"], comb_mass0=b["comb_mass0"], mass_w0=b["mass_w0"],
        u_bar=b["u_bar"], v_bar=b["v_bar"], w_bar=b["w_bar"],
        lam_max=b["lam_max"], mu_min=b["mu_min"],
    )
    monitors = read_series(os.path.join(rundir, "series.csv"))
    snapshots = []
    snapdir = os.path.join(rundir, "snapshots")
    if load_snapshots and os.path.isdir(snapdir):
        ks = sorted({name.split("_")[1].split(".")[0] for name in os.listdir(snapdir)})
        for k in ks:
            fields = {}
            t = 0.0
            for name in ("u", "v", "w"):
                f, t = gridmod.read_snapshot(os.path.join(snapdir, f"{name}_{k}.txt"))
                fields[name] = f
            snapshots.append(StateTriple(fields["u"], fields["v"], fields["w"], t))
    return TrajectoryView(
        grid=g, params=p, regime=doc["regime"], eps=doc["eps"], bounds=bounds,
        monitors=monitors, snapshots=snapshots,
        config=_CfgView(t_end=doc["t_end"], snapshot_interval=doc["snapshot_interval"]),
    )
