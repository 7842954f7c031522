"""Flatten triangulated surfaces to parametric charts and optimize
stiffener layouts on them via a B-spline height field."""

from .errors import (
    GateFailure,
    MeshError,
    NonManifoldError,
    NumericalError,
    StaleStateError,
    StiffoptError,
    ValidationError,
)
from .mesh import TriSurfaceMesh, TopologyClass, classify_topology, load_surface, save_obj

__all__ = [
    "GateFailure",
    "MeshError",
    "NonManifoldError",
    "NumericalError",
    "StaleStateError",
    "StiffoptError",
    "TopologyClass",
    "TriSurfaceMesh",
    "ValidationError",
    "classify_topology",
    "load_surface",
    "save_obj",
]

__version__ = "0.1.0"
