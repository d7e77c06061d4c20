"""Rectangular cell-centered grids and Neumann-respecting discrete operators.

The domain is an axis-aligned rectangle [0, lx] x [0, ly] split into nx * ny
equal cells; all fields live at cell centers, stored row-major (one row per
y index).  Zero-flux (homogeneous Neumann) boundaries are realized by
first-order reflection ghosts: the ghost cell copies the adjacent boundary
cell, which makes every boundary face flux vanish exactly and keeps the
divergence-form operators conservative to machine precision.

Operators provided here:

- ``laplacian``: standard 5-point (3-point in 1D) stencil with reflection
  ghosts.
- ``taxis_divergence``: +div(carrier * grad(potential)) with donor-cell
  upwinding; the upwind cell is the one the face drift points away from,
  and a face with equal potential values carries exactly zero flux.
- ``integrate`` / ``norms``: midpoint quadrature and the discrete L1/L2/Linf
  norms built on it.
- ``grad_sq_integral``: face-based integral of |grad f|^2, optionally
  weighted with the harmonic mean of the adjacent cell weights (which keeps
  the functional positive and mimics flux continuity).

One-dimensional problems use ny = 1; the y direction then contributes no
faces and no stencil terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import NDArray

from . import backend


class GridError(ValueError):
    """Invalid grid geometry or mismatched grids."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or Inf; carries the offending cell index."""

    def __init__(self, op: str, iy: int, ix: int, value: float):
        self.cell = (iy, ix)
        super().__init__(f"{op}: non-finite value {value!r} at cell (iy={iy}, ix={ix})")


@dataclass(frozen=True)
class GridSpec:
    """Discrete rectangle: nx x ny cells on [0, lx] x [0, ly].

    ny = 1 selects 1D mode.  Cell widths are hx = lx/nx, hy = ly/ny and the
    total measure is lx * ly.
    """

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 3:
            raise GridError(f"nx must be >= 3, got {self.nx}")
        if self.ny < 1:
            raise GridError(f"ny must be >= 1, got {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise GridError(f"side lengths must be positive, got lx={self.lx}, ly={self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def measure(self) -> float:
        """|Omega| = lx * ly."""
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[NDArray, NDArray]:
        """Coordinate arrays (x, y), each of shape (ny, nx)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.broadcast_to(x, (self.ny, self.nx)).copy(), np.broadcast_to(
            y[:, None], (self.ny, self.nx)
        ).copy()


class Field:
    """Cell-centered scalar field on a :class:`GridSpec`.

    Values are held as a C-contiguous float64 array of shape (ny, nx);
    flattening row-major recovers the documented cell ordering.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != grid.n_cells:
            raise GridError(
                f"field has {arr.size} values, grid expects {grid.n_cells} (nx={grid.nx}, ny={grid.ny})"
            )
        self.grid = grid
        self.values = np.ascontiguousarray(arr.reshape(grid.ny, grid.nx))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        x, y = grid.cell_centers()
        return cls(grid, fn(x, y))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __repr__(self):
        g = self.grid
        return f"Field({g.nx}x{g.ny} on [0,{g.lx}]x[0,{g.ly}])"


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float


def _require_finite(f: Field, op: str) -> None:
    vals = f.values
    if not np.isfinite(vals).all():
        iy, ix = np.argwhere(~np.isfinite(vals))[0]
        raise NonFiniteFieldError(op, int(iy), int(ix), float(vals[iy, ix]))


def _require_same_grid(a: Field, b: Field, op: str) -> None:
    if a.grid != b.grid:
        raise GridError(f"{op}: fields live on different grids ({a.grid} vs {b.grid})")


def laplacian(f: Field) -> Field:
    """5-point Laplacian (3-point in 1D) with reflection ghosts.

    Ghost cells copy the adjacent boundary cell, so the normal derivative
    vanishes at every boundary face and the stencil is exactly conservative.
    """
    _require_finite(f, "laplacian")
    g = f.grid
    out = backend.laplacian(f.values, 1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy))
    return Field(g, out)


def taxis_divergence(carrier: Field, potential: Field, grid: Optional[GridSpec] = None) -> Field:
    """+div(carrier * grad(potential)) with donor-cell upwinding.

    Face flux F = carrier_up * (psi_R - psi_L)/h, where carrier_up is taken
    from the cell the face drift points away from (psi_R > psi_L means the
    drift points right, so the upwind cell is the left one).  Boundary faces
    carry zero flux; equal potential values give exactly zero flux.  The
    caller applies the taxis sign and coefficient.
    """
    if grid is not None and carrier.grid != grid:
        raise GridError("taxis_divergence: carrier grid does not match the supplied grid")
    _require_same_grid(carrier, potential, "taxis_divergence")
    _require_finite(carrier, "taxis_divergence")
    _require_finite(potential, "taxis_divergence")
    g = carrier.grid
    out = backend.upwind_divergence(carrier.values, potential.values, 1.0 / g.hx, 1.0 / g.hy)
    return Field(g, out)


def integrate(f: Field) -> float:
    """Midpoint rule: hx * hy * sum of cell values."""
    _require_finite(f, "integrate")
    g = f.grid
    return g.hx * g.hy * float(f.values.sum())


def norms(f: Field) -> Norms:
    """Discrete (L1, L2, Linf) norms of a field."""
    _require_finite(f, "norms")
    g = f.grid
    area = g.hx * g.hy
    vals = f.values
    l1 = area * float(np.abs(vals).sum())
    l2 = float(np.sqrt(area * float((vals * vals).sum())))
    linf = float(np.abs(vals).max())
    return Norms(l1, l2, linf)


def grad_sq_integral(f: Field, weight: Optional[Field] = None) -> float:
    """Face-based integral of |grad f|^2, optionally weighted.

    Each interior face contributes (difference quotient)^2 times the face
    measure hx*hy; when a weight field is given the face term is multiplied
    by the harmonic mean of the two adjacent cell weights.  Boundary faces
    contribute nothing (zero normal gradient).
    """
    _require_finite(f, "grad_sq_integral")
    g = f.grid
    if weight is not None:
        _require_same_grid(f, weight, "grad_sq_integral")
        _require_finite(weight, "grad_sq_integral")
        if not (weight.values > 0).all():
            raise ValueError("grad_sq_integral: weight must be strictly positive")
        wv = weight.values
    a = f.values
    area = g.hx * g.hy
    total = 0.0
    dx = (a[:, 1:] - a[:, :-1]) * (1.0 / g.hx)
    tx = dx * dx
    if weight is not None:
        wl, wr = wv[:, :-1], wv[:, 1:]
        tx = tx * (2.0 * wl * wr / (wl + wr))
    total += float(tx.sum()) * area
    if g.ny > 1:
        dy = (a[1:, :] - a[:-1, :]) * (1.0 / g.hy)
        ty = dy * dy
        if weight is not None:
            wl, wr = wv[:-1, :], wv[1:, :]
            ty = ty * (2.0 * wl * wr / (wl + wr))
        total += float(ty.sum()) * area
    return total


def cell_gradients(f: Field) -> tuple[NDArray, NDArray]:
    """Cell-centered gradient components from averaged face differences.

    Boundary faces contribute zero normal gradient (reflection convention),
    so each cell averages its two adjacent face difference quotients per
    direction.
    """
    _require_finite(f, "cell_gradients")
    g = f.grid
    a = f.values
    fx = np.zeros((g.ny, g.nx + 1))
    fx[:, 1:-1] = (a[:, 1:] - a[:, :-1]) * (1.0 / g.hx)
    gx = 0.5 * (fx[:, :-1] + fx[:, 1:])
    if g.ny > 1:
        fy = np.zeros((g.ny + 1, g.nx))
        fy[1:-1, :] = (a[1:, :] - a[:-1, :]) * (1.0 / g.hy)
        gy = 0.5 * (fy[:-1, :] + fy[1:, :])
    else:
        gy = np.zeros_like(a)
    return gx, gy


# Snapshot file format: a one-line header followed by ny rows of nx values
# with full round-trip precision.
_SNAP_HEADER = "# alarm-taxis field nx={nx} ny={ny} lx={lx} ly={ly} t={t}"


def write_snapshot(path, f: Field, t: float) -> None:
    """Write a field snapshot (text, one grid row per line, >=15 digits)."""
    g = f.grid
    lines = [_SNAP_HEADER.format(nx=g.nx, ny=g.ny, lx=repr(g.lx), ly=repr(g.ly), t=repr(float(t)))]
    for row in f.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[Field, float]:
    """Read a snapshot written by :func:`write_snapshot`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# alarm-taxis field "):
            raise ValueError(f"{path}: not an alarm-taxis snapshot file")
        meta = {}
        for tok in header[len("# alarm-taxis field ") :].split():
            key, _, val = tok.partition("=")
            meta[key] = val
        grid = GridSpec(int(meta["nx"]), int(meta["ny"]), float(meta["lx"]), float(meta["ly"]))
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != grid.shape:
        raise ValueError(f"{path}: data shape {data.shape} does not match header {grid.shape}")
    return Field(grid, data), float(meta["t"])
