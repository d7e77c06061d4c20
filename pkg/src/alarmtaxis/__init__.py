"""Finite-volume simulator and a-priori-estimate auditor for the
three-species alarm-taxis predator-prey system."""

from .grid import Field, GridSpec, grad_sq_integral, integrate, laplacian, norms, taxis_divergence
from .model import CutoffSpec, Params, StateTriple, reaction_f, reaction_g, reaction_h, sigma_eps, sigma_eps_prime
from .solver import SolverConfig, SolverAbort, Trajectory, rhs, run, stable_dt, step
from . import backend

__version__ = "0.1.0"
__all__ = [
    "Field", "GridSpec", "grad_sq_integral", "integrate", "laplacian", "norms",
    "taxis_divergence", "CutoffSpec", "Params", "StateTriple",
    "reaction_f", "reaction_g", "reaction_h", "sigma_eps", "sigma_eps_prime",
    "SolverConfig", "SolverAbort", "Trajectory", "rhs", "run", "stable_dt", "step",
    "backend", "__version__",
]
