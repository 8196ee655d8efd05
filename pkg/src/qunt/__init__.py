"""Quasi-uniform moving-mesh solver for nonlinear heat conduction in building envelopes."""
from __future__ import annotations

from .errors import ConvergenceError, MeshError, NumericalError, SingularSystemError
from .gridmotion import MonitorConfig, MovingMesh
from .pdesolver import (
    BoundarySpec,
    DimensionlessProblem,
    FieldState,
    PropertyLaw,
    ReferenceScales,
    integrate,
)

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec",
    "ConvergenceError",
    "DimensionlessProblem",
    "FieldState",
    "MeshError",
    "MonitorConfig",
    "MovingMesh",
    "NumericalError",
    "PropertyLaw",
    "ReferenceScales",
    "SingularSystemError",
    "integrate",
]
