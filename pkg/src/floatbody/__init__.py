"""Neutrally floating bodies of revolution at density 1/2.

Pipeline: a curvature profile defines the water envelope
(:mod:`floatbody.envelope`); the contour heights follow from a Volterra-type
initial value problem (:mod:`floatbody.kernel`, :mod:`floatbody.solver`);
the contour is revolved into a mesh (:mod:`floatbody.shape`) and checked
by an independent hydrostatic oracle (:mod:`floatbody.oracle`).
"""

from .envelope import CurvatureProfile, Envelope, build_envelope
from .errors import (
    ConfigError,
    FloatBodyError,
    GeometryError,
    InvalidShapeError,
    NumericError,
    ProfileError,
    SolverStall,
    VerificationFailed,
)
from .kernel import KernelContext
from .solver import SolverConfig, Solution, residual, solve

__version__ = "0.1.0"

__all__ = [
    "CurvatureProfile",
    "Envelope",
    "build_envelope",
    "KernelContext",
    "SolverConfig",
    "Solution",
    "solve",
    "residual",
    "FloatBodyError",
    "ConfigError",
    "ProfileError",
    "GeometryError",
    "SolverStall",
    "NumericError",
    "InvalidShapeError",
    "VerificationFailed",
]
