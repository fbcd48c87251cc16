"""Two-phase microstructures and the local operators built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import Field, GridGeometry, ShapeMismatchError
from .projection import gamma1_array


@dataclass(frozen=True, eq=False)
class TwoPhaseMedium:
    """Indicator grid of phase 1 with scalar moduli ``z1`` (phase 1) and ``z2``.

    Only the phase-1 indicator is stored; phase 2 is its complement.
    """

    geometry: GridGeometry
    indicator: np.ndarray
    z1: complex = 1.0
    z2: complex = 1.0

    def __post_init__(self):
        chi = np.asarray(self.indicator)
        if chi.shape != self.geometry.cells:
            raise ShapeMismatchError(
                f"indicator of shape {chi.shape} does not match grid {self.geometry.cells}"
            )
        if not np.isin(chi, (0, 1)).all():
            raise ValueError("indicator values must be 0 or 1")
        chi = chi.astype(np.uint8)
        chi.setflags(write=False)
        object.__setattr__(self, "indicator", chi)
        object.__setattr__(self, "z1", complex(self.z1))
        object.__setattr__(self, "z2", complex(self.z2))

    @property
    def chi1(self) -> np.ndarray:
        return self.indicator.astype(float)

    @property
    def chi2(self) -> np.ndarray:
        return 1.0 - self.chi1

    @property
    def volume_fraction(self) -> float:
        return float(self.indicator.mean())

    @property
    def contrast(self) -> complex:
        """``t = z1 / z2``."""
        return self.z1 / self.z2

    @property
    def is_homogeneous(self) -> bool:
        return self.z1 == self.z2

    @property
    def z0(self) -> complex:
        """Reference parameter ``z2 / (z2 - z1)`` for the ``B = chi1`` model."""
        if self.is_homogeneous:
            raise ZeroDivisionError("z0 is infinite for a homogeneous medium (z1 == z2)")
        return self.z2 / (self.z2 - self.z1)

    def modulus(self) -> np.ndarray:
        """Per-cell value of L: ``z1`` on phase 1, ``z2`` on phase 2."""
        return np.where(self.indicator == 1, self.z1, self.z2)

    def with_moduli(self, z1: complex, z2: complex) -> "TwoPhaseMedium":
        return replace(self, z1=z1, z2=z2)


def _check(medium: TwoPhaseMedium, f: Field) -> None:
    if medium.geometry != f.geometry:
        raise ShapeMismatchError(
            f"medium grid {medium.geometry.cells} differs from field grid {f.geometry.cells}"
        )


def apply_chi(medium: TwoPhaseMedium, f: Field) -> Field:
    _check(medium, f)
    return f.with_values(f.values * medium.chi1)


def apply_L(medium: TwoPhaseMedium, f: Field) -> Field:
    _check(medium, f)
    return f.with_values(f.values * medium.modulus())


def apply_A(medium: TwoPhaseMedium, f: Field) -> Field:
    """``gamma1 chi1 gamma1 F``."""
    _check(medium, f)
    if f.components != f.geometry.dim:
        raise ShapeMismatchError(
            f"A acts on {f.geometry.dim}-component fields, got {f.components}"
        )
    g = gamma1_array(f.values, f.geometry)
    return f.with_values(gamma1_array(medium.chi1 * g, f.geometry))


# -- microstructure generators ----------------------------------------------


def _check_fraction(f1: float) -> None:
    if not 0.0 <= f1 <= 1.0:
        raise ValueError(f"volume fraction must lie in [0, 1], got {f1}")


def make_homogeneous(geometry: GridGeometry, phase: int = 2, z1=1.0, z2=1.0) -> TwoPhaseMedium:
    value = 1 if phase == 1 else 0
    return TwoPhaseMedium(geometry, np.full(geometry.cells, value, dtype=np.uint8), z1, z2)


def make_laminate(
    geometry: GridGeometry, normal_axis: int = 0, f1: float = 0.5, z1=1.0, z2=1.0
) -> TwoPhaseMedium:
    """Slabs normal to ``normal_axis``; the first ``round(f1 * n)`` slabs are phase 1."""
    _check_fraction(f1)
    if not 0 <= normal_axis < geometry.dim:
        raise ValueError(f"normal axis {normal_axis} out of range for a {geometry.dim}D grid")
    n = geometry.cells[normal_axis]
    slabs = math.floor(f1 * n + 0.5)
    profile = (np.arange(n) < slabs).astype(np.uint8)
    shape = [1] * geometry.dim
    shape[normal_axis] = n
    chi = np.broadcast_to(profile.reshape(shape), geometry.cells)
    return TwoPhaseMedium(geometry, chi, z1, z2)


def make_random(
    geometry: GridGeometry, f1: float = 0.5, seed: int = 0, z1=1.0, z2=1.0
) -> TwoPhaseMedium:
    """Exactly ``round(f1 * N)`` phase-1 cells at seed-reproducible positions."""
    _check_fraction(f1)
    rng = np.random.default_rng(seed)
    count = math.floor(f1 * geometry.size + 0.5)
    chi = np.zeros(geometry.size, dtype=np.uint8)
    chi[rng.permutation(geometry.size)[:count]] = 1
    return TwoPhaseMedium(geometry, chi.reshape(geometry.cells), z1, z2)


def make_disk(
    geometry: GridGeometry, radius_fraction: float = 0.25, z1=1.0, z2=1.0
) -> TwoPhaseMedium:
    """Centred disk (ball in 3D, segment in 1D) of phase 1, radius relative to the cell."""
    if not 0.0 < radius_fraction < 0.5:
        raise ValueError(f"radius fraction must lie in (0, 0.5), got {radius_fraction}")
    centres = [(np.arange(n) + 0.5) / n - 0.5 for n in geometry.cells]
    grids = np.meshgrid(*centres, indexing="ij")
    r2 = sum(g**2 for g in grids)
    chi = (r2 <= radius_fraction**2).astype(np.uint8)
    return TwoPhaseMedium(geometry, chi, z1, z2)


def make_checkerboard(
    geometry: GridGeometry, blocks: int = 2, z1=1.0, z2=1.0
) -> TwoPhaseMedium:
    """``blocks`` alternating tiles per axis; every axis length must divide evenly."""
    if blocks < 2 or blocks % 2:
        raise ValueError("a periodic checkerboard needs an even number of blocks >= 2")
    if any(n % blocks for n in geometry.cells):
        raise ValueError(f"grid {geometry.cells} is not divisible into {blocks} blocks per axis")
    index = np.meshgrid(
        *[np.arange(n) // (n // blocks) for n in geometry.cells], indexing="ij"
    )
    chi = (sum(index) % 2 == 0).astype(np.uint8)
    return TwoPhaseMedium(geometry, chi, z1, z2)


def make_tiled(geometry: GridGeometry, pattern, z1=1.0, z2=1.0) -> TwoPhaseMedium:
    """Periodic repetition of a small 0/1 ``pattern`` over the grid."""
    pattern = np.asarray(pattern, dtype=np.uint8)
    if pattern.ndim != geometry.dim or any(
        n % p for n, p in zip(geometry.cells, pattern.shape)
    ):
        raise ValueError(f"pattern of shape {pattern.shape} does not tile {geometry.cells}")
    reps = tuple(n // p for n, p in zip(geometry.cells, pattern.shape))
    return TwoPhaseMedium(geometry, np.tile(pattern, reps), z1, z2)


# -- indicator files ----------------------------------------------------------


def format_indicator(medium: TwoPhaseMedium) -> str:
    header = " ".join(str(v) for v in (medium.geometry.dim,) + medium.geometry.cells)
    rows = medium.indicator.reshape(-1, medium.geometry.cells[-1])
    body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows)
    return header + "\n" + body + "\n"


def parse_indicator(text: str, z1=1.0, z2=1.0) -> TwoPhaseMedium:
    tokens = text.split()
    if not tokens:
        raise ValueError("indicator file is empty")
    d = int(tokens[0])
    cells = tuple(int(t) for t in tokens[1 : 1 + d])
    if len(cells) != d:
        raise ValueError("indicator header truncated")
    geometry = GridGeometry(cells)
    body = tokens[1 + d :]
    if len(body) != geometry.size:
        raise ValueError(f"indicator body has {len(body)} entries, expected {geometry.size}")
    if any(tok not in ("0", "1") for tok in body):
        raise ValueError("indicator entries must be 0 or 1")
    chi = np.array(body, dtype=np.uint8).reshape(cells)
    return TwoPhaseMedium(geometry, chi, z1, z2)


def write_indicator(path: str | Path, medium: TwoPhaseMedium) -> None:
    Path(path).write_text(format_indicator(medium))


def read_indicator(path: str | Path, z1=1.0, z2=1.0) -> TwoPhaseMedium:
    return parse_indicator(Path(path).read_text(), z1, z2)
