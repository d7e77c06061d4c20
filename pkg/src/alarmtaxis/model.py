"""Model coefficients, reaction kinetics, and the taxis cutoff.

The three-species kinetics are

    f(u, v, w) = u (lambda1 - mu1 u - a1 v - a2 w)      prey
    g(u, v, w) = v (lambda2 - mu2 v + b1 u - a3 w)      predator
    h(u, v, w) = w (lambda3 - mu3 w + b2 u + b3 v)      superpredator

with every coefficient strictly positive except the prey-taxis strength xi,
which may be zero.  The food-chain structure admits weights eta1, eta2 in
(0,1) with b1*eta1 <= a1, b2*eta2 <= a2 and b3*eta2 <= a3*eta1, so the
combination f + eta1 g + eta2 h grows at most linearly; those weights (and
the resulting combined-mass bound constant) are fixed here at construction
time.

The cutoff sigma_eps(s) = s * sigma(eps*s - 1) truncates the advected
carrier: it is the identity for s <= 1/eps, lands in [0, s] on
[1/eps, 2/eps], and vanishes beyond 2/eps.  Its derivative is globally
bounded by 1 + 2*max|sigma'|.  The mollifier sigma is the standard smooth
step q(1-x)/(q(x)+q(1-x)) with q(x) = exp(-1/x) for x > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Field, GridSpec


class ParameterError(ValueError):
    """Model coefficients violating the sign constraints."""


@dataclass(frozen=True)
class Params:
    """All model coefficients; validated on construction."""

    d1: float
    d2: float
    d3: float
    xi: float
    chi: float
    lambda1: float
    lambda2: float
    lambda3: float
    mu1: float
    mu2: float
    mu3: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    b3: float

    def __post_init__(self):
        positive = {
            "d1": self.d1, "d2": self.d2, "d3": self.d3, "chi": self.chi,
            "lambda1": self.lambda1, "lambda2": self.lambda2, "lambda3": self.lambda3,
            "mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3,
            "a1": self.a1, "a2": self.a2, "a3": self.a3,
            "b1": self.b1, "b2": self.b2, "b3": self.b3,
        }
        bad = [k for k, val in positive.items() if not val > 0]
        if bad:
            raise ParameterError(f"coefficients must be > 0: {', '.join(bad)}")
        if not self.xi >= 0:
            raise ParameterError(f"xi must be >= 0, got {self.xi}")
        # combination weights for the linear-growth estimate; the three sign
        # conditions they must satisfy are asserted here once and for all
        e1, e2 = self.eta1, self.eta2
        assert 0 < e1 < 1 and 0 < e2 < 1
        assert self.b1 * e1 <= self.a1
        assert self.b2 * e2 <= self.a2
        assert self.b3 * e2 <= self.a3 * e1

    @property
    def eta1(self) -> float:
        return 0.5 * min(1.0, self.a1 / self.b1)

    @property
    def eta2(self) -> float:
        return 0.5 * min(1.0, self.a2 / self.b2, self.a3 * self.eta1 / self.b3)

    @property
    def lam_max(self) -> float:
        return max(self.lambda1, self.lambda2, self.lambda3)

    @property
    def mu_min(self) -> float:
        return min(self.mu1, self.mu2, self.mu3)

    def as_tuple(self) -> tuple:
        return (
            self.d1, self.d2, self.d3, self.xi, self.chi,
            self.lambda1, self.lambda2, self.lambda3,
            self.mu1, self.mu2, self.mu3,
            self.a1, self.a2, self.a3, self.b1, self.b2, self.b3,
        )

    @classmethod
    def unit(cls, **overrides) -> "Params":
        """All coefficients 1 (xi included), with optional overrides."""
        base = {k: 1.0 for k in (
            "d1", "d2", "d3", "xi", "chi",
            "lambda1", "lambda2", "lambda3", "mu1", "mu2", "mu3",
            "a1", "a2", "a3", "b1", "b2", "b3",
        )}
        base.update(overrides)
        return cls(**base)


def _check_nonneg(name, *vals):
    for v in vals:
        arr = np.asarray(v)
        if np.any(arr < 0):
            raise ValueError(f"{name}: population densities must be nonnegative")


def reaction_f(u, v, w, p: Params):
    """Prey kinetics u*(lambda1 - mu1 u - a1 v - a2 w)."""
    _check_nonneg("reaction_f", u, v, w)
    return u * (p.lambda1 - p.mu1 * u - p.a1 * v - p.a2 * w)


def reaction_g(u, v, w, p: Params):
    """Predator kinetics v*(lambda2 - mu2 v + b1 u - a3 w)."""
    _check_nonneg("reaction_g", u, v, w)
    return v * (p.lambda2 - p.mu2 * v + p.b1 * u - p.a3 * w)


def reaction_h(u, v, w, p: Params):
    """Superpredator kinetics w*(lambda3 - mu3 w + b2 u + b3 v)."""
    _check_nonneg("reaction_h", u, v, w)
    return w * (p.lambda3 - p.mu3 * w + p.b2 * u + p.b3 * v)


def reaction_jacobian(u: float, v: float, w: float, p: Params) -> np.ndarray:
    """3x3 Jacobian of (f, g, h) at a point."""
    return np.array([
        [p.lambda1 - 2 * p.mu1 * u - p.a1 * v - p.a2 * w, -p.a1 * u, -p.a2 * u],
        [p.b1 * v, p.lambda2 - 2 * p.mu2 * v + p.b1 * u - p.a3 * w, -p.a3 * v],
        [p.b2 * w, p.b3 * w, p.lambda3 - 2 * p.mu3 * w + p.b2 * u + p.b3 * v],
    ])


def lipschitz_bound(sup_u: float, sup_v: float, sup_w: float, p: Params) -> float:
    """Row-sum bound on the kinetics Jacobian over [0,U]x[0,V]x[0,W].

    Also dominates every per-capita loss rate, which is what the step-size
    control needs.
    """
    lu = p.lambda1 + 2 * p.mu1 * sup_u + p.a1 * (sup_u + sup_v) + p.a2 * (sup_u + sup_w)
    lv = p.lambda2 + 2 * p.mu2 * sup_v + p.b1 * (sup_u + sup_v) + p.a3 * (sup_v + sup_w)
    lw = p.lambda3 + 2 * p.mu3 * sup_w + p.b2 * (sup_u + sup_w) + p.b3 * (sup_v + sup_w)
    return max(lu, lv, lw)


def kinetics_ode(t, y, p: Params):
    """Right-hand side of the space-free kinetics, for ODE integrators."""
    u, v, w = y
    return [
        u * (p.lambda1 - p.mu1 * u - p.a1 * v - p.a2 * w),
        v * (p.lambda2 - p.mu2 * v + p.b1 * u - p.a3 * w),
        w * (p.lambda3 - p.mu3 * w + p.b2 * u + p.b3 * v),
    ]


def ode_oracle(p: Params, y0, times) -> np.ndarray:
    """High-order adaptive reference solution of the kinetics ODE.

    Independent of the PDE stepper; used to check spatially constant runs.
    Returns an array of shape (3, len(times)).
    """
    from scipy.integrate import solve_ivp

    times = np.asarray(times, dtype=float)
    sol = solve_ivp(
        kinetics_ode, (times[0], times[-1]), list(y0), args=(p,),
        method="DOP853", rtol=1e-12, atol=1e-14, t_eval=times, dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"ODE oracle failed: {sol.message}")
    return sol.y


# --- smooth step and cutoff ---------------------------------------------

def _q(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = x > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[m] = np.exp(-1.0 / x[m])
    return out


def _q_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = x > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[m] = np.exp(-1.0 / x[m]) / (x[m] * x[m])
    return out


def smooth_step(x):
    """C-infinity monotone step: 1 for x <= 0, 0 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = _q(x)
    b = _q(1.0 - x)
    out = b / (a + b)
    return out if out.ndim else float(out)


def smooth_step_prime(x):
    """Derivative of :func:`smooth_step` (nonpositive, compactly supported)."""
    x = np.asarray(x, dtype=float)
    a = _q(x)
    b = _q(1.0 - x)
    ap = _q_prime(x)
    bp = -_q_prime(1.0 - x)
    out = (a * bp - ap * b) / ((a + b) * (a + b))
    return out if out.ndim else float(out)


@lru_cache(maxsize=1)
def _sigma_prime_max() -> float:
    xs = np.linspace(0.0, 1.0, 100_000)
    return float(np.abs(smooth_step_prime(xs)).max())


def sigma_prime_bound() -> float:
    """Global bound 1 + 2*max|sigma'| on the cutoff derivative."""
    return 1.0 + 2.0 * _sigma_prime_max()


@dataclass(frozen=True)
class CutoffSpec:
    """Regularization strength eps in (0, 1] plus the derivative bound."""

    eps: float
    sigma_prime_bound: float = field(default=0.0)

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ParameterError(f"eps must lie in (0, 1], got {self.eps}")
        if self.sigma_prime_bound == 0.0:
            object.__setattr__(self, "sigma_prime_bound", sigma_prime_bound())


def sigma_eps_array(s, eps: float):
    """Vectorized cutoff s*sigma(eps*s - 1); exact on the outer branches.

    No argument validation: this is the solver's per-step path.
    """
    s = np.asarray(s, dtype=float)
    se = eps * s
    out = s.copy()
    high = se >= 2.0
    if high.any():
        out[high] = 0.0
    mid = (se > 1.0) & (se < 2.0)
    if mid.any():
        out[mid] = s[mid] * smooth_step(se[mid] - 1.0)
    return out


def sigma_eps(s, c: CutoffSpec):
    """Cutoff value at s >= 0 (scalar or array)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("sigma_eps: argument must be nonnegative")
    out = sigma_eps_array(arr, c.eps)
    return float(out) if out.ndim == 0 else out


def sigma_eps_prime(s, c: CutoffSpec):
    """Derivative sigma(eps*s - 1) + eps*s*sigma'(eps*s - 1)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("sigma_eps_prime: argument must be nonnegative")
    se = c.eps * arr
    out = np.ones_like(arr)
    high = se >= 2.0
    out[high] = 0.0
    mid = (se > 1.0) & (se < 2.0)
    if mid.any():
        x = se[mid] - 1.0
        out[mid] = smooth_step(x) + se[mid] * smooth_step_prime(x)
    return float(out) if out.ndim == 0 else out


@dataclass
class StateTriple:
    """The (u, v, w) densities on a shared grid at one time level."""

    u: Field
    v: Field
    w: Field
    t: float = 0.0

    def __post_init__(self):
        if not (self.u.grid == self.v.grid == self.w.grid):
            raise ValueError("StateTriple: fields must share one grid")
        if self.t < 0:
            raise ValueError("StateTriple: time must be nonnegative")
        for name, f in (("u", self.u), ("v", self.v), ("w", self.w)):
            if not np.isfinite(f.values).all():
                raise ValueError(f"StateTriple: non-finite values in {name}")
            if (f.values < 0).any():
                raise ValueError(f"StateTriple: negative values in {name}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def constant(cls, grid: GridSpec, u: float, v: float, w: float, t: float = 0.0) -> "StateTriple":
        return cls(Field.constant(grid, u), Field.constant(grid, v), Field.constant(grid, w), t)
