"""Per-step monitoring and audits of the closed-form a priori bounds.

Every run records, at each accepted step: masses, sup and L2 norms, the
weighted combined mass integral(u + eta1 v + eta2 w), the gradient energy
functionals integral|grad u|^2, integral|grad v|^2, integral|grad(uv)|^2 and
integral|grad w|^2/(w+1)^2, the running space-time integral of |lap u|^2,
the 6/5-power norm of the advective-plus-reaction force in the v equation,
and the Gagliardo-Nirenberg ratio of u.  Slack against every audited
inequality is stored alongside as named bound margins.

The audits are pure functions of a trajectory and the coefficients:

- combined-mass bound: integral(u + eta1 v + eta2 w)(t) stays below
  max{initial value, 3*lambda*|Omega|/mu} with lambda = max lambda_i and
  mu = min mu_i, plus its time-integrated companion
  mu * integral_0^t integral(u^2 + eta1 v^2 + eta2 w^2) <= c1*(1 + lambda*t).
- sup comparison bounds: u <= max{||u0||_inf, lambda1/mu1}; chained v bound
  when xi = 0; the 2/eps-type bounds for v and w in regularized runs.
- mass balance of w: residual r(t) = integral w0 + int_0^t integral h -
  integral w(t) must not fall below -1e-6*(1+|integral w0|); classical runs
  keep |r| at quadrature size.
- epsilon-uniformity: cumulative energy integrals stay within a fixed factor
  across a ladder of regularization strengths.

Tolerances: relative 1e-3 on bound audits (discretization slack), 1e-6 on
algebraic identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import grid as gridmod
from .grid import Field
from .model import Params

BOUND_AUDIT_RTOL = 1e-3
IDENTITY_RTOL = 1e-6


@dataclass
class MonitorRecord:
    """Audited quantities at one time level."""

    t: float
    dt: float
    mass_u: float
    mass_v: float
    mass_w: float
    comb_mass: float
    sup_u: float
    sup_v: float
    sup_w: float
    l2_u: float
    l2_v: float
    l2_w: float
    grad_u_sq: float
    grad_v_sq: float
    grad_uv_sq: float
    logw_grad_sq: float
    cum_lap_u_sq: float
    gn_ratio_u: float
    rhs_v_l65: float
    cum_h_int: float
    lap_u_sq: float
    min_u: float
    min_v: float
    min_w: float
    guard_hits: int
    bound_margins: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundConstants:
    """Run-level constants entering the bound margins."""

    l1_bound: float
    comb_mass0: float
    mass_w0: float
    u_bar: float
    v_bar: Optional[float]
    w_bar: Optional[float]
    lam_max: float
    mu_min: float


def bound_constants(p: Params, regime: str, eps: Optional[float],
                    sup_u0: float, sup_v0: float, sup_w0: float,
                    comb_mass0: float, mass_w0: float, measure: float) -> BoundConstants:
    """Evaluate the comparison-bound constants for a run.

    u_bar = max{||u0||_inf, lambda1/mu1} holds in every regime (the u
    equation carries no taxis).  The v bound chains through u_bar for
    xi = 0; regularized runs use the max{..., 2/eps, ...} form, and only
    they admit a closed-form w bound.
    """
    l1_bound = max(comb_mass0, 3.0 * p.lam_max * measure / p.mu_min)
    u_bar = max(sup_u0, p.lambda1 / p.mu1)
    v_bar = None
    w_bar = None
    if regime == "classical":
        v_bar = max(sup_v0, (p.lambda2 + p.b1 * u_bar) / p.mu2)
    elif regime == "regularized":
        v_bar = max(sup_v0, 2.0 / eps, (p.lambda2 + p.b1 * u_bar) / p.mu2)
        w_bar = max(sup_w0, 2.0 / eps, (p.lambda3 + p.b2 * u_bar + p.b3 * v_bar) / p.mu3)
    return BoundConstants(
        l1_bound=l1_bound, comb_mass0=comb_mass0, mass_w0=mass_w0,
        u_bar=u_bar, v_bar=v_bar, w_bar=w_bar,
        lam_max=p.lam_max, mu_min=p.mu_min,
    )


def build_record(sums, *, t: float, dt: float, area: float, p: Params,
                 bc: BoundConstants, cum_lap_u_sq: float, cum_h_int: float,
                 cum_q: float, guard_hits: int) -> MonitorRecord:
    """Assemble a MonitorRecord from the raw kernel reductions."""
    (sum_u, sum_v, sum_w, min_u, min_v, min_w, sup_u, sup_v, sup_w,
     sum_u2, sum_v2, sum_w2,
     gradsq_u, gradsq_v, gradsq_uv, gradsq_logw,
     sum_lapu2, sum_grad4, sum_h, sum_f65, _mfu, _mfuv) = sums

    mass_u = area * sum_u
    mass_v = area * sum_v
    mass_w = area * sum_w
    comb_mass = area * (sum_u + p.eta1 * sum_v + p.eta2 * sum_w)
    grad_u_sq = area * gradsq_u
    grad_v_sq = area * gradsq_v
    grad_uv_sq = area * gradsq_uv
    logw_grad_sq = area * gradsq_logw
    lap_u_sq = area * sum_lapu2

    den = lap_u_sq * grad_u_sq
    gn = (area * sum_grad4) / den if den > 0.0 else math.nan

    margins = {
        "l1": bc.l1_bound - comb_mass,
        "l2l2": bc.l1_bound * (1.0 + bc.lam_max * t) - bc.mu_min * cum_q,
        "sup_u": bc.u_bar - sup_u,
        "mass": bc.mass_w0 + cum_h_int - mass_w,
    }
    if bc.v_bar is not None:
        margins["sup_v"] = bc.v_bar - sup_v
    if bc.w_bar is not None:
        margins["sup_w"] = bc.w_bar - sup_w

    return MonitorRecord(
        t=t, dt=dt, mass_u=mass_u, mass_v=mass_v, mass_w=mass_w,
        comb_mass=comb_mass, sup_u=sup_u, sup_v=sup_v, sup_w=sup_w,
        l2_u=math.sqrt(area * sum_u2), l2_v=math.sqrt(area * sum_v2),
        l2_w=math.sqrt(area * sum_w2),
        grad_u_sq=grad_u_sq, grad_v_sq=grad_v_sq, grad_uv_sq=grad_uv_sq,
        logw_grad_sq=logw_grad_sq, cum_lap_u_sq=cum_lap_u_sq, gn_ratio_u=gn,
        rhs_v_l65=area * sum_f65, cum_h_int=cum_h_int, lap_u_sq=lap_u_sq,
        min_u=min_u, min_v=min_v, min_w=min_w, guard_hits=guard_hits,
        bound_margins=margins,
    )


@dataclass
class AuditRow:
    name: str
    worst_margin: float
    t_worst: float
    passed: bool
    note: str = ""


@dataclass
class AuditReport:
    title: str
    rows: list
    preamble: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def render_text(self) -> str:
        lines = []
        if self.preamble:
            lines.append(f"# {self.preamble}")
        lines.append(f"== {self.title} ==")
        lines.append(f"{'inequality':<34} {'worst-margin':>16} {'t-of-worst':>12} {'result':>8}")
        for r in self.rows:
            status = "pass" if r.passed else "FAIL"
            note = f"  ({r.note})" if r.note else ""
            lines.append(f"{r.name:<34} {r.worst_margin:>16.6e} {r.t_worst:>12.6g} {status:>8}{note}")
        return "\n".join(lines)


def _series(traj, name) -> np.ndarray:
    return np.array([getattr(m, name) for m in traj.monitors])


def _margin_series(traj, key) -> np.ndarray:
    return np.array([m.bound_margins.get(key, math.nan) for m in traj.monitors])


def _worst(times, margins):
    k = int(np.argmin(margins))
    return float(margins[k]), float(times[k])


def audit_l1_bound(traj, p: Params, tol: float = BOUND_AUDIT_RTOL) -> AuditReport:
    """Combined-mass bound and its time-integrated L2 companion."""
    times = _series(traj, "t")
    comb = _series(traj, "comb_mass")
    bc = traj.bounds
    margins = bc.l1_bound * (1.0 + tol) - comb
    worst, t_worst = _worst(times, margins)
    rows = [AuditRow(
        name="comb_mass <= max{M0, 3*lam*|O|/mu}",
        worst_margin=worst, t_worst=t_worst, passed=worst >= 0.0,
        note=f"bound={bc.l1_bound!r}",
    )]
    m2 = _margin_series(traj, "l2l2") + tol * bc.l1_bound * (1.0 + bc.lam_max * times)
    worst2, t2 = _worst(times, m2)
    rows.append(AuditRow(
        name="mu*cum int (u2+e1*v2+e2*w2) bound",
        worst_margin=worst2, t_worst=t2, passed=worst2 >= 0.0,
    ))
    return AuditReport(title="combined L1/L2 kinetic bounds", rows=rows)


def audit_sup_bounds(traj, p: Params, regime: Optional[str] = None,
                     tol: float = BOUND_AUDIT_RTOL) -> AuditReport:
    """Regime-appropriate sup comparison bounds with relative tolerance."""
    regime = regime or traj.regime
    bc = traj.bounds
    times = _series(traj, "t")
    rows = []

    def check(name, bound, sup_series):
        margins = bound * (1.0 + tol) - sup_series
        worst, tw = _worst(times, margins)
        rows.append(AuditRow(name=name, worst_margin=worst, t_worst=tw,
                             passed=worst >= 0.0, note=f"bound={bound!r}"))

    check("sup u <= max{||u0||,l1/m1}", bc.u_bar, _series(traj, "sup_u"))
    if bc.v_bar is not None:
        label = ("sup v <= max{||v0||,2/eps,(l2+b1*c1)/m2}"
                 if regime == "regularized" else "sup v <= max{||v0||,(l2+b1*ub)/m2}")
        check(label, bc.v_bar, _series(traj, "sup_v"))
    if bc.w_bar is not None:
        check("sup w <= max{||w0||,2/eps,...}", bc.w_bar, _series(traj, "sup_w"))
    if not rows:
        rows.append(AuditRow(name="(no closed-form sup bound in this regime)",
                             worst_margin=math.inf, t_worst=0.0, passed=True))
    return AuditReport(title=f"sup comparison bounds [{regime}]", rows=rows)


def audit_mass_inequality(traj, p: Params) -> AuditReport:
    """w mass balance: r(t) = int w0 + int_0^t int h - int w(t) >= -tol.

    The cumulative reaction integral is trapezoid-accumulated on the step
    grid during the run.  Classical runs should keep |r| at quadrature size
    (the balance holds with equality before any limit is taken); the audit
    itself only enforces the one-sided inequality.
    """
    times = _series(traj, "t")
    r = _margin_series(traj, "mass")
    bc = traj.bounds
    tol_mass = IDENTITY_RTOL * (1.0 + abs(bc.mass_w0))
    worst, tw = _worst(times, r)
    rows = [AuditRow(
        name="int w <= int w0 + cum int h",
        worst_margin=worst + tol_mass, t_worst=tw, passed=worst >= -tol_mass,
        note=f"max|r|={float(np.abs(r).max())!r}",
    )]
    return AuditReport(
        title="w mass inequality",
        rows=rows,
        preamble="checked at every recorded step; the continuum statement allows a null set of times",
    )


def gn_ratio(f: Field) -> float:
    """Gagliardo-Nirenberg ratio int|grad f|^4 / (int|lap f|^2 int|grad f|^2).

    The fourth-power integrand uses face gradients averaged to cells; the
    denominator uses the face-based gradient square integral and the
    reflected-ghost Laplacian.  Constant fields have no ratio (nan).
    """
    lap = gridmod.laplacian(f)
    den1 = gridmod.integrate(Field(f.grid, lap.values * lap.values))
    den2 = gridmod.grad_sq_integral(f)
    if den1 <= 0.0 or den2 <= 0.0:
        return math.nan
    gx, gy = gridmod.cell_gradients(f)
    g2 = gx * gx + gy * gy
    num = gridmod.integrate(Field(f.grid, g2 * g2))
    return num / (den1 * den2)


def _cumtrap(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if len(times) > 1:
        inc = 0.5 * np.diff(times) * (values[1:] + values[:-1])
        out[1:] = np.cumsum(inc)
    return out


@dataclass
class EnergySeries:
    """Time series of the gradient energies and their cumulative integrals."""

    t: np.ndarray
    grad_u_sq: np.ndarray
    sup_grad_u_sq: float
    cum_grad_v_sq: np.ndarray
    cum_grad_uv_sq: np.ndarray
    cum_logw_grad_sq: np.ndarray
    cum_lap_u_sq: np.ndarray
    cum_rhs_v_65: np.ndarray

    def finals(self) -> dict:
        return {
            "sup_grad_u_sq": float(self.sup_grad_u_sq),
            "cum_grad_v_sq": float(self.cum_grad_v_sq[-1]),
            "cum_grad_uv_sq": float(self.cum_grad_uv_sq[-1]),
            "cum_logw_grad_sq": float(self.cum_logw_grad_sq[-1]),
            "cum_lap_u_sq": float(self.cum_lap_u_sq[-1]),
            "cum_rhs_v_65": float(self.cum_rhs_v_65[-1]),
        }


def energy_series(traj) -> EnergySeries:
    """Cumulative energy functionals of one run (trapezoid in time)."""
    t = _series(traj, "t")
    gu = _series(traj, "grad_u_sq")
    return EnergySeries(
        t=t,
        grad_u_sq=gu,
        sup_grad_u_sq=float(gu.max()),
        cum_grad_v_sq=_cumtrap(t, _series(traj, "grad_v_sq")),
        cum_grad_uv_sq=_cumtrap(t, _series(traj, "grad_uv_sq")),
        cum_logw_grad_sq=_cumtrap(t, _series(traj, "logw_grad_sq")),
        cum_lap_u_sq=_series(traj, "cum_lap_u_sq"),
        cum_rhs_v_65=_cumtrap(t, _series(traj, "rhs_v_l65")),
    )


def audit_energy_uniformity(finals: Sequence[dict], factor: float = 2.0,
                            labels: Optional[Sequence[str]] = None) -> AuditReport:
    """Across a regularization ladder, final energies must agree within a factor."""
    rows = []
    keys = ["sup_grad_u_sq", "cum_grad_v_sq", "cum_grad_uv_sq",
            "cum_logw_grad_sq", "cum_lap_u_sq", "cum_rhs_v_65"]
    for key in keys:
        vals = np.array([f[key] for f in finals])
        hi, lo = float(vals.max()), float(vals.min())
        ok = hi <= factor * lo + 1e-300
        rows.append(AuditRow(
            name=f"{key} within x{factor:g}",
            worst_margin=factor * lo - hi, t_worst=math.nan, passed=ok,
            note=f"max={hi:.6e} min={lo:.6e}",
        ))
    labels_txt = ", ".join(labels) if labels else f"{len(finals)} runs"
    return AuditReport(title=f"energy uniformity across ladder ({labels_txt})", rows=rows)
