"""Numerical geometry of graphs with flat normal bundle.

Taylor-jet evaluation of graph geometry, two-path verification of the
structure equations and curvature identities, and quadrature of the
integral curvature estimates.
"""

from ._accel import BACKEND
from .errors import (DomainError, FlatnessError, GeometryError, HypothesisViolation,
                     JetError, ParseError, PmcError)
from .expr import parse, pretty
from .geometry import GraphMap, PointGeometry, build_point_geometry, scale_graph
from .jets import Jet

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DomainError", "FlatnessError", "GeometryError", "GraphMap",
    "HypothesisViolation", "Jet", "JetError", "ParseError", "PmcError", "PointGeometry",
    "build_point_geometry", "parse", "pretty", "scale_graph",
]
