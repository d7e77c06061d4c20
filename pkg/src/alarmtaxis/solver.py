"""Time integration of the classical, full, and regularized systems.

The semidiscrete system on the cell-centered grid is

    du/dt = d1 lap(u)                                   + f(u,v,w)
    dv/dt = d2 lap(v) - xi  div(S(v) grad u)            + g(u,v,w)
    dw/dt = d3 lap(w) - chi div(S(w) grad (u v))        + h(u,v,w)

with reflection-ghost Neumann stencils, donor-cell upwinding of the taxis
fluxes, and S the identity (classical/full regimes) or the smooth cutoff
sigma_eps (regularized regime).  The product signal uv is formed cell-wise
before any differencing.

Stepping is Heun's method (SSP-RK2): two forward-Euler stages combined
convexly.  Each stage uses the exact splitting

    z' = z + dt * (d*lap(z) - coef*div(...) + z*pc + src)        (flux form)

unless the cell's total loss rate  Lam = d*(outflow stencil weight)
+ (advective outflow flux)/z + max(-pc, 0)  would break nonnegativity
within dt (dt*Lam > 1); such cells instead divide by (1 + dt*Lam) with all
gains kept explicit (Patankar form),

    z' = (z + dt*(d*inflow + advective inflow + z*max(pc,0) + src)) / (1 + dt*Lam),

which is nonnegative for any dt without clipping.  The division branch is
an emergency guard: it never activates for dt below the advertised stable
step at cfl_safety <= 1/6, activations are counted per step, and all
smooth verification runs assert zero activations, so the accuracy-relevant
path is the plain conservative flux form.

The stable step is

    dt = cfl_safety * min( h^2/(4 max d_i),
                           h/(max face drift + tiny),
                           1/(L + tiny) ),

with h = min(hx, hy), face drift = max over faces of
xi*|du/dn|*sigma_prime_bound and chi*|d(uv)/dn|*sigma_prime_bound (bound
factor 1 outside the regularized regime), L the kinetics Lipschitz bound at
the current sup norms, and tiny = 1e-30.  A step below 1e-12 * t_end aborts
with a blow-up-suspicion diagnostic carrying the recent monitor records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from . import diagnostics as diag
from . import grid as gridmod
from .grid import Field, GridSpec
from .model import Params, StateTriple, lipschitz_bound, sigma_eps_array, sigma_prime_bound
from . import model

TINY = 1e-30
DT_UNDERFLOW_FACTOR = 1e-12

REGIMES = ("classical", "full", "regularized")


class SolverAbort(RuntimeError):
    """Hard solver failure: blow-up suspicion, NaN, or scheme violation."""

    def __init__(self, reason: str, t: float, step_index: int,
                 cell=None, species: Optional[str] = None, monitor_tail=None):
        self.reason = reason
        self.t = t
        self.step_index = step_index
        self.cell = cell
        self.species = species
        self.monitor_tail = monitor_tail or []
        loc = ""
        if species is not None:
            loc = f" [species {species}"
            loc += f", cell {cell}]" if cell is not None else "]"
        super().__init__(f"{reason} at t={t!r}, step {step_index}{loc}")


@dataclass
class SolverConfig:
    """Run settings: horizon, step-size safety, regime, cutoff, outputs."""

    t_end: float
    cfl_safety: float = 0.4
    regime: str = "classical"
    eps: Optional[float] = None
    snapshot_interval: Optional[float] = None
    mms: Optional[object] = None
    presmooth_steps: int = 0

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.regime == "regularized":
            if self.eps is None:
                raise ValueError("regularized regime requires eps")
            if not (0.0 < self.eps <= 1.0):
                raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        elif self.eps is not None:
            raise ValueError(f"eps is only meaningful in the regularized regime (regime={self.regime!r})")
        if self.snapshot_interval is not None and not self.snapshot_interval > 0:
            raise ValueError("snapshot_interval must be positive")
        if self.presmooth_steps < 0:
            raise ValueError("presmooth_steps must be >= 0")


@dataclass
class Trajectory:
    """Snapshots, per-step monitors, and accepted step sizes of one run."""

    grid: GridSpec
    params: Params
    config: SolverConfig
    regime: str
    eps: Optional[float]
    bounds: diag.BoundConstants
    snapshots: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    backend_name: str = backend.NAME
    presmooth_steps: int = 0

    def snapshot_times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def monitor_series(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.monitors])


def _regime_checks(p: Params, cfg: SolverConfig) -> None:
    if cfg.regime == "classical" and p.xi != 0.0:
        raise ValueError(f"classical regime requires xi = 0, got xi={p.xi}")


def _carriers(v: np.ndarray, w: np.ndarray, cfg: SolverConfig):
    if cfg.regime == "regularized":
        return sigma_eps_array(v, cfg.eps), sigma_eps_array(w, cfg.eps)
    return v, w


def _source_eval(cfg: SolverConfig, grid: GridSpec):
    """Return a callable t -> (su, sv, sw) arrays, or None."""
    mms = cfg.mms
    if mms is None or mms.sources is None:
        return None
    x, y = grid.cell_centers()
    su, sv, sw = mms.sources

    def at(t: float):
        return (np.ascontiguousarray(su(x, y, t)),
                np.ascontiguousarray(sv(x, y, t)),
                np.ascontiguousarray(sw(x, y, t)))

    return at


def _kinetics_on(cfg: SolverConfig) -> bool:
    return not (cfg.mms is not None and getattr(cfg.mms, "disable_kinetics", False))


def _taxis_coeffs(p: Params, cfg: SolverConfig) -> tuple:
    """Effective (xi, chi); manufactured cases may switch the taxis off."""
    if cfg.mms is not None and getattr(cfg.mms, "disable_taxis", False):
        return 0.0, 0.0
    return p.xi, p.chi


def _stage(u, v, w, t, dt, p, cfg, grid, sources, kin_on):
    sv, sw = _carriers(v, w, cfg)
    if sources is not None:
        su_a, sv_a, sw_a = sources(t)
    else:
        su_a = sv_a = sw_a = None
    xi, chi = _taxis_coeffs(p, cfg)
    return backend.euler_stage(
        u, v, w, sv, sw, su_a, sv_a, sw_a, dt,
        1.0 / grid.hx, 1.0 / grid.hy,
        p.d1, p.d2, p.d3, xi, chi,
        p.lambda1, p.lambda2, p.lambda3,
        p.mu1, p.mu2, p.mu3,
        p.a1, p.a2, p.a3, p.b1, p.b2, p.b3,
        kin_on,
    )


def _heun(u, v, w, t, dt, p, cfg, grid, sources, kin_on):
    """One SSP-RK2 step; returns new arrays and total guard activations."""
    ua, va, wa, h1 = _stage(u, v, w, t, dt, p, cfg, grid, sources, kin_on)
    ub, vb, wb, h2 = _stage(ua, va, wa, t + dt, dt, p, cfg, grid, sources, kin_on)
    return 0.5 * (u + ub), 0.5 * (v + vb), 0.5 * (w + wb), h1 + h2


def _drift_bound_factor(cfg: SolverConfig) -> float:
    return sigma_prime_bound() if cfg.regime == "regularized" else 1.0


def _dt_formula(h: float, dmax: float, drift: float, lip: float, cfl: float) -> float:
    return cfl * min(h * h / (4.0 * dmax), h / (drift + TINY), 1.0 / (lip + TINY))


def rhs(state: StateTriple, p: Params, cfg: SolverConfig):
    """Semidiscrete right-hand side as three fields.

    Composes the public grid operators; used by tests and small studies,
    while run() drives the fused kernels with identical arithmetic.
    """
    _regime_checks(p, cfg)
    g = state.grid
    u, v, w = state.u, state.v, state.w
    sv, sw = _carriers(v.values, w.values, cfg)
    kin_on = _kinetics_on(cfg)
    xi, chi = _taxis_coeffs(p, cfg)

    du = p.d1 * gridmod.laplacian(u).values
    dv = p.d2 * gridmod.laplacian(v).values
    dw = p.d3 * gridmod.laplacian(w).values
    if xi != 0.0:
        dv = dv - xi * gridmod.taxis_divergence(Field(g, sv), u).values
    if chi != 0.0:
        uv = Field(g, u.values * v.values)
        dw = dw - chi * gridmod.taxis_divergence(Field(g, sw), uv).values
    if kin_on:
        du = du + model.reaction_f(u.values, v.values, w.values, p)
        dv = dv + model.reaction_g(u.values, v.values, w.values, p)
        dw = dw + model.reaction_h(u.values, v.values, w.values, p)
    sources = _source_eval(cfg, g)
    if sources is not None:
        su_a, sv_a, sw_a = sources(state.t)
        du = du + su_a
        dv = dv + sv_a
        dw = dw + sw_a
    for name, arr in (("u", du), ("v", dv), ("w", dw)):
        if not np.isfinite(arr).all():
            iy, ix = np.argwhere(~np.isfinite(arr))[0]
            raise SolverAbort("NaN in operator output", state.t, -1,
                              cell=(int(iy), int(ix)), species=name)
    return Field(g, du), Field(g, dv), Field(g, dw)


def stable_dt(state: StateTriple, p: Params, cfg: SolverConfig,
              grid: Optional[GridSpec] = None) -> float:
    """Stability-controlled step size (see module docstring for the formula)."""
    _regime_checks(p, cfg)
    g = grid or state.grid
    u, v, w = state.u.values, state.v.values, state.w.values
    bfac = _drift_bound_factor(cfg)
    xi, chi = _taxis_coeffs(p, cfg)
    inv_hx, inv_hy = 1.0 / g.hx, 1.0 / g.hy
    drift_u = xi * backend.face_absgrad_max(u, inv_hx, inv_hy)
    drift_uv = chi * backend.face_absgrad_max(np.ascontiguousarray(u * v), inv_hx, inv_hy)
    drift = max(drift_u, drift_uv) * bfac
    lip = lipschitz_bound(float(u.max()), float(v.max()), float(w.max()), p)
    h = min(g.hx, g.hy)
    dt = _dt_formula(h, max(p.d1, p.d2, p.d3), drift, lip, cfg.cfl_safety)
    if cfg.t_end > 0 and dt < DT_UNDERFLOW_FACTOR * cfg.t_end:
        raise SolverAbort("dt underflow (blow-up suspicion)", state.t, -1)
    return dt


def step(state: StateTriple, p: Params, cfg: SolverConfig,
         dt: Optional[float] = None) -> StateTriple:
    """Advance one Heun step; nonnegativity of the output is mandatory."""
    _regime_checks(p, cfg)
    g = state.grid
    if dt is None:
        dt = stable_dt(state, p, cfg)
    sources = _source_eval(cfg, g)
    kin_on = _kinetics_on(cfg)
    u2, v2, w2, _ = _heun(state.u.values, state.v.values, state.w.values,
                          state.t, dt, p, cfg, g, sources, kin_on)
    _validate_state_arrays(u2, v2, w2, state.t + dt, -1)
    return StateTriple(Field(g, u2), Field(g, v2), Field(g, w2), state.t + dt)


def _validate_state_arrays(u, v, w, t, step_index, monitor_tail=None):
    for name, arr in (("u", u), ("v", v), ("w", w)):
        if not np.isfinite(arr).all():
            iy, ix = np.argwhere(~np.isfinite(arr))[0]
            raise SolverAbort("NaN in state", t, step_index, cell=(int(iy), int(ix)),
                              species=name, monitor_tail=monitor_tail)
        if (arr < 0).any():
            iy, ix = np.argwhere(arr < 0)[0]
            raise SolverAbort("scheme violation: negative cell", t, step_index,
                              cell=(int(iy), int(ix)), species=name,
                              monitor_tail=monitor_tail)


def _monitor(u, v, w, cfg, p, grid):
    sv, _ = _carriers(v, w, cfg)
    xi, chi = _taxis_coeffs(p, cfg)
    return backend.monitor_sums(
        u, v, w, sv, 1.0 / grid.hx, 1.0 / grid.hy,
        p.d1, p.d2, p.d3, xi, chi,
        p.lambda1, p.lambda2, p.lambda3,
        p.mu1, p.mu2, p.mu3,
        p.a1, p.a2, p.a3, p.b1, p.b2, p.b3,
    )


def presmooth(u, v, w, p: Params, grid: GridSpec, steps: int):
    """k explicit diffusion steps applied to the initial data."""
    dmax = max(p.d1, p.d2, p.d3)
    h = min(grid.hx, grid.hy)
    dt = 0.2 * h * h / (4.0 * dmax)
    ihx2, ihy2 = 1.0 / grid.hx**2, 1.0 / grid.hy**2
    for _ in range(steps):
        u = u + dt * p.d1 * backend.laplacian(u, ihx2, ihy2)
        v = v + dt * p.d2 * backend.laplacian(v, ihx2, ihy2)
        w = w + dt * p.d3 * backend.laplacian(w, ihx2, ihy2)
    return u, v, w


def run(initial: StateTriple, p: Params, cfg: SolverConfig) -> Trajectory:
    """Advance to t_end with adaptive dt; snapshots on schedule, monitors every step.

    Deterministic: identical inputs produce identical trajectories byte for
    byte (per backend).
    """
    _regime_checks(p, cfg)
    g = initial.grid
    area = g.cell_area
    u = initial.u.values.copy()
    v = initial.v.values.copy()
    w = initial.w.values.copy()

    if cfg.presmooth_steps:
        u, v, w = presmooth(u, v, w, p, g, cfg.presmooth_steps)

    sources = _source_eval(cfg, g)
    kin_on = _kinetics_on(cfg)
    bfac = _drift_bound_factor(cfg)
    xi_eff, chi_eff = _taxis_coeffs(p, cfg)
    dmax = max(p.d1, p.d2, p.d3)
    h = min(g.hx, g.hy)
    t_end = float(cfg.t_end)
    interval = cfg.snapshot_interval if cfg.snapshot_interval is not None else (t_end if t_end > 0 else 1.0)

    sums = _monitor(u, v, w, cfg, p, g)
    comb0 = area * (sums[0] + p.eta1 * sums[1] + p.eta2 * sums[2])
    bounds = diag.bound_constants(
        p, cfg.regime, cfg.eps, sums[6], sums[7], sums[8],
        comb0, area * sums[2], g.measure,
    )
    traj = Trajectory(grid=g, params=p, config=cfg, regime=cfg.regime, eps=cfg.eps,
                      bounds=bounds, presmooth_steps=cfg.presmooth_steps)

    cum_lap = 0.0
    cum_h = 0.0
    cum_q = 0.0
    prev_lap = area * sums[16]
    prev_h = area * sums[18]
    prev_q = area * (sums[9] + p.eta1 * sums[10] + p.eta2 * sums[11])

    traj.monitors.append(diag.build_record(
        sums, t=0.0, dt=0.0, area=area, p=p, bc=bounds,
        cum_lap_u_sq=cum_lap, cum_h_int=cum_h, cum_q=cum_q, guard_hits=0,
    ))
    traj.snapshots.append(StateTriple(Field(g, u.copy()), Field(g, v.copy()), Field(g, w.copy()), 0.0))

    if t_end == 0.0:
        return traj

    t = 0.0
    snap_k = 1
    big = max(t_end, 1.0)

    def next_snap_time(k: int) -> float:
        s = k * interval
        return t_end if s > t_end - 1e-12 * big else s

    next_snap = next_snap_time(snap_k)
    step_index = 0

    while t < t_end:
        drift = max(xi_eff * sums[20], chi_eff * sums[21]) * bfac
        lip = lipschitz_bound(sums[6], sums[7], sums[8], p)
        dt = _dt_formula(h, dmax, drift, lip, cfg.cfl_safety)
        if dt < DT_UNDERFLOW_FACTOR * t_end:
            raise SolverAbort("dt underflow (blow-up suspicion)", t, step_index,
                              monitor_tail=traj.monitors[-10:])
        landing = None
        bound_t = min(next_snap, t_end)
        if t + dt >= bound_t:
            dt = bound_t - t
            landing = bound_t

        u, v, w, hits = _heun(u, v, w, t, dt, p, cfg, g, sources, kin_on)
        step_index += 1
        t = landing if landing is not None else t + dt

        sums = _monitor(u, v, w, cfg, p, g)
        if not all(np.isfinite(s) for s in sums[:9]):
            _validate_state_arrays(u, v, w, t, step_index, traj.monitors[-10:])
        if min(sums[3], sums[4], sums[5]) < 0.0:
            _validate_state_arrays(u, v, w, t, step_index, traj.monitors[-10:])

        lap_inst = area * sums[16]
        h_inst = area * sums[18]
        q_inst = area * (sums[9] + p.eta1 * sums[10] + p.eta2 * sums[11])
        cum_lap += 0.5 * dt * (prev_lap + lap_inst)
        cum_h += 0.5 * dt * (prev_h + h_inst)
        cum_q += 0.5 * dt * (prev_q + q_inst)
        prev_lap, prev_h, prev_q = lap_inst, h_inst, q_inst

        traj.monitors.append(diag.build_record(
            sums, t=t, dt=dt, area=area, p=p, bc=bounds,
            cum_lap_u_sq=cum_lap, cum_h_int=cum_h, cum_q=cum_q, guard_hits=hits,
        ))
        traj.dt_history.append(dt)

        if landing is not None and landing == next_snap:
            traj.snapshots.append(StateTriple(
                Field(g, u.copy()), Field(g, v.copy()), Field(g, w.copy()), t))
            snap_k += 1
            next_snap = next_snap_time(snap_k)

    if traj.snapshots[-1].t != t_end:
        traj.snapshots.append(StateTriple(
            Field(g, u.copy()), Field(g, v.copy()), Field(g, w.copy()), t_end))
    return traj
