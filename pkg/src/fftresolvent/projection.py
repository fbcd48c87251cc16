"""Fourier-space projections onto periodic gradient fields and their complement.

``gamma1`` keeps, for every wave vector ``k != 0``, the component of the
Fourier coefficient along ``k``: ``F_hat(k) -> k (k . F_hat(k)) / |k|^2``.
The mean (``k = 0``) is annihilated, so ``gamma2 = I - gamma1`` retains the
uniform part together with the divergence-free fluctuations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Field, GridGeometry, ShapeMismatchError, frequencies


@lru_cache(maxsize=32)
def _unit_wavevectors(geometry: GridGeometry) -> np.ndarray:
    k = frequencies(geometry).astype(float)
    norm = np.sqrt((k**2).sum(axis=0))
    zero = norm == 0
    norm[zero] = 1.0
    khat = k / norm
    khat[(slice(None),) + np.nonzero(zero)] = 0.0
    khat.setflags(write=False)
    return khat


def gamma1_array(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """Apply the gradient-field projection to a raw ``(d, *cells)`` array."""
    khat = _unit_wavevectors(geometry)
    fh = np.fft.fftn(values, axes=geometry.axes)
    along = np.einsum("c...,c...->...", khat, fh)
    return np.fft.ifftn(khat * along, axes=geometry.axes)


def reflect_array(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """``(I - 2 gamma1)`` on a raw array."""
    return values - 2.0 * gamma1_array(values, geometry)


def _check(f: Field) -> None:
    if f.components != f.geometry.dim:
        raise ShapeMismatchError(
            f"gamma projections act on {f.geometry.dim}-component fields, got {f.components}"
        )


def apply_gamma1(f: Field) -> Field:
    _check(f)
    return f.with_values(gamma1_array(f.values, f.geometry))


def apply_gamma2(f: Field) -> Field:
    _check(f)
    return f.with_values(f.values - gamma1_array(f.values, f.geometry))


def apply_reflection(f: Field) -> Field:
    """``(I - 2 gamma1) F``: an involution and an isometry."""
    _check(f)
    return f.with_values(reflect_array(f.values, f.geometry))


@dataclass(frozen=True)
class GammaOperator:
    """Callable handle on ``gamma1`` or ``gamma2`` for a fixed grid."""

    geometry: GridGeometry
    kind: str = "gamma1"

    def __post_init__(self):
        if self.kind not in ("gamma1", "gamma2"):
            raise ValueError(f"unknown projection kind {self.kind!r}")

    def __call__(self, f: Field) -> Field:
        if f.geometry != self.geometry:
            raise ShapeMismatchError("field lives on a different grid")
        return apply_gamma1(f) if self.kind == "gamma1" else apply_gamma2(f)
