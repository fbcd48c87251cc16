"""Periodic grids, complex vector fields and their discrete Fourier transforms.

The unit cell has volume 1, so every inner product carries a ``1/N`` factor
where ``N`` is the number of grid cells.  Fourier coefficients follow the
Fourier-series convention ``F_hat(k) = (1/N) sum_x F(x) exp(-2 pi i k.x/n)``,
which makes Parseval read ``|F|^2 = sum_k |F_hat(k)|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np


class ShapeMismatchError(ValueError):
    """Two fields (or a field and a medium) do not live on the same grid."""


@dataclass(frozen=True)
class GridGeometry:
    """Uniform periodic grid on the unit cell."""

    cells: tuple[int, ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        if not 1 <= len(cells) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(cells)}")
        if any(n < 2 for n in cells):
            raise ValueError(f"every axis needs at least 2 cells, got {cells}")
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def size(self) -> int:
        """Total number of cells N."""
        return int(np.prod(self.cells))

    @property
    def axes(self) -> tuple[int, ...]:
        """Grid axes of a ``(components, *cells)`` array."""
        return tuple(range(1, self.dim + 1))


@lru_cache(maxsize=32)
def frequencies(geometry: GridGeometry) -> np.ndarray:
    """Signed integer wave vectors, shape ``(d, *cells)``.

    Each component lies in ``(-n/2, n/2]``; on even grids the Nyquist
    frequency is stored as ``+n/2``.
    """
    axes = []
    for n in geometry.cells:
        k = np.fft.fftfreq(n, d=1.0 / n)
        k[k == -n / 2] = n / 2
        axes.append(k)
    k = np.stack(np.meshgrid(*axes, indexing="ij"))
    k.setflags(write=False)
    return k


@dataclass(frozen=True, eq=False)
class Field:
    """Complex ``c``-component field sampled on a periodic grid.

    The value array has shape ``(components, *geometry.cells)`` and is made
    read-only on construction.
    """

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != self.geometry.dim + 1 or values.shape[1:] != self.geometry.cells:
            raise ShapeMismatchError(
                f"value array of shape {values.shape} does not match grid {self.geometry.cells}"
            )
        if values.shape[0] < 1:
            raise ShapeMismatchError("a field needs at least one component")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.geometry, values)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: complex) -> "Field":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Field":
        return self.with_values(self.values / scalar)

    def __neg__(self) -> "Field":
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-series coefficients of a :class:`Field`, same array layout."""

    geometry: GridGeometry
    coefficients: np.ndarray

    @property
    def components(self) -> int:
        return self.coefficients.shape[0]


def zeros(geometry: GridGeometry, components: int) -> Field:
    return Field(geometry, np.zeros((components,) + geometry.cells, dtype=complex))


def constant(geometry: GridGeometry, value) -> Field:
    """Uniform field whose per-cell vector is ``value``."""
    value = np.asarray(value, dtype=complex).reshape(-1)
    shape = (value.size,) + (1,) * geometry.dim
    return Field(geometry, np.broadcast_to(value.reshape(shape), (value.size,) + geometry.cells))


def random_field(geometry: GridGeometry, components: int, rng: np.random.Generator) -> Field:
    """Field with independent standard complex normal entries."""
    shape = (components,) + geometry.cells
    return Field(geometry, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _check_compatible(f: Field, g: Field) -> None:
    if f.geometry != g.geometry or f.components != g.components:
        raise ShapeMismatchError(
            f"fields differ: {f.components} components on {f.geometry.cells} vs "
            f"{g.components} components on {g.geometry.cells}"
        )


def inner_product(f: Field, g: Field) -> complex:
    """Discrete unit-cell inner product ``(1/N) sum conj(f) g``."""
    _check_compatible(f, g)
    return complex(np.vdot(f.values, g.values)) / f.geometry.size


def field_norm(f: Field) -> float:
    return float(np.sqrt(np.vdot(f.values, f.values).real / f.geometry.size))


def fft_forward(f: Field) -> SpectralField:
    axes = f.geometry.axes
    return SpectralField(f.geometry, np.fft.fftn(f.values, axes=axes, norm="forward"))


def fft_inverse(fh: SpectralField) -> Field:
    axes = fh.geometry.axes
    return Field(fh.geometry, np.fft.ifftn(fh.coefficients, axes=axes, norm="forward"))


def spectral_energy(fh: SpectralField) -> float:
    """``sum_k |F_hat(k)|^2``, equal to ``field_norm(F)**2``."""
    return float(np.vdot(fh.coefficients, fh.coefficients).real)


def fourier_mode(geometry: GridGeometry, k, amplitude) -> Field:
    """Single plane wave ``amplitude * exp(2 pi i k.x / n)`` sampled on the grid."""
    k = np.asarray(k, dtype=float)
    x = np.stack(np.meshgrid(*[np.arange(n) for n in geometry.cells], indexing="ij"))
    phase = sum(k[a] * x[a] / geometry.cells[a] for a in range(geometry.dim))
    wave = np.exp(2j * np.pi * phase)
    amplitude = np.asarray(amplitude, dtype=complex).reshape((-1,) + (1,) * geometry.dim)
    return Field(geometry, amplitude * wave)


# -- portable text layout ---------------------------------------------------


def format_field(f: Field) -> str:
    header = " ".join(str(v) for v in (f.components, f.geometry.dim) + f.geometry.cells)
    flat = f.values.reshape(-1)
    body = "\n".join(f"{z.real:.17g} {z.imag:.17g}" for z in flat)
    return header + "\n" + body + "\n"


def parse_field(text: str) -> Field:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("field file is missing its header")
    c, d = int(tokens[0]), int(tokens[1])
    cells = tuple(int(t) for t in tokens[2 : 2 + d])
    if len(cells) != d:
        raise ValueError("field header truncated")
    geometry = GridGeometry(cells)
    numbers = np.array(tokens[2 + d :], dtype=float)
    expected = 2 * c * geometry.size
    if numbers.size != expected:
        raise ValueError(f"field body has {numbers.size} numbers, expected {expected}")
    values = (numbers[0::2] + 1j * numbers[1::2]).reshape((c,) + cells)
    return Field(geometry, values)


def write_field(path: str | Path, f: Field) -> None:
    Path(path).write_text(format_field(f))


def read_field(path: str | Path) -> Field:
    return parse_field(Path(path).read_text())
