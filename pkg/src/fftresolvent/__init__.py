"""Matrix-free FFT solvers for resolvents of periodic two-phase composites."""

from .grid import Field, GridGeometry, field_norm, inner_product
from .media import TwoPhaseMedium
from .schemes import IterationReport, SchemeKind, SolveConfig, solve
from .spectral import SpectralBounds

__all__ = [
    "Field",
    "GridGeometry",
    "IterationReport",
    "SchemeKind",
    "SolveConfig",
    "SpectralBounds",
    "TwoPhaseMedium",
    "field_norm",
    "inner_product",
    "solve",
]
