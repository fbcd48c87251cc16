"""Spectral bounds of ``A`` on gradient fields and a dense brute-force oracle.

The oracle assembles ``A`` as an explicit ``dN x dN`` matrix over the
real-space basis and restricts it to the gradient subspace through an
orthonormal basis of plane waves ``khat exp(2 pi i k.x / n) / sqrt(N)``,
one per nonzero wave vector.  That is exactly the range of the discrete
projection, so no eigendecomposition of the projection is needed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import Field, GridGeometry, field_norm, inner_product, random_field
from .media import TwoPhaseMedium, apply_A
from .projection import _unit_wavevectors, gamma1_array

MAX_DENSE_SIZE = 4096


class Provenance(str, Enum):
    EXACT_DENSE = "exact_dense"
    POWER_METHOD = "power_method"
    MANUAL = "manual"


class SingularResolventError(ValueError):
    """``z0`` coincides (numerically) with an eigenvalue of ``A`` on gradient fields."""

    def __init__(self, z0: complex, nearest: complex):
        super().__init__(f"resolvent is singular at z0={z0}: nearest eigenvalue {nearest}")
        self.z0 = z0
        self.nearest = nearest


@dataclass(frozen=True)
class SpectralBounds:
    a_minus: float
    a_plus: float
    provenance: Provenance = Provenance.MANUAL
    iterations_used: int = 0

    def __post_init__(self):
        if not 0.0 <= self.a_minus <= self.a_plus <= 1.0:
            raise ValueError(
                f"spectral bounds must satisfy 0 <= a- <= a+ <= 1, got "
                f"({self.a_minus}, {self.a_plus})"
            )
        object.__setattr__(self, "provenance", Provenance(self.provenance))


def _clamp_unit(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def clamped_bounds(a_minus: float, a_plus: float, provenance, iterations: int = 0) -> SpectralBounds:
    lo, hi = _clamp_unit(a_minus), _clamp_unit(a_plus)
    return SpectralBounds(min(lo, hi), hi, provenance, iterations)


# -- dense oracle -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Explicit matrix of ``A`` on flattened ``(d, *cells)`` fields."""

    geometry: GridGeometry
    matrix: np.ndarray
    _basis: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def gradient_basis(self) -> np.ndarray:
        """Orthonormal columns spanning the gradient subspace (Euclidean inner product)."""
        if not self._basis:
            self._basis.append(gradient_basis(self.geometry))
        return self._basis[0]

    def restricted(self) -> np.ndarray:
        q = self.gradient_basis
        return q.conj().T @ self.matrix @ q

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        m = self.matrix
        return bool(np.abs(m - m.conj().T).max() <= tol * max(1.0, np.abs(m).max()))

    def matvec(self, f: Field) -> Field:
        if f.geometry != self.geometry:
            raise ValueError("field lives on a different grid")
        flat = self.matrix @ f.values.reshape(-1)
        return f.with_values(flat.reshape(f.values.shape))


def gradient_basis(geometry: GridGeometry) -> np.ndarray:
    khat = _unit_wavevectors(geometry)
    d, n = geometry.dim, geometry.size
    x = np.stack(np.meshgrid(*[np.arange(m) for m in geometry.cells], indexing="ij"))
    k_index = np.stack(np.meshgrid(*[np.arange(m) for m in geometry.cells], indexing="ij"))
    k_index = k_index.reshape(d, -1)
    x = x.reshape(d, -1)
    cells = np.array(geometry.cells, dtype=float).reshape(d, 1)
    # phase[k, x] = sum_a k_a x_a / n_a
    phase = (k_index / cells).T @ x
    waves = np.exp(2j * np.pi * phase) / np.sqrt(n)
    directions = khat.reshape(d, -1).T
    keep = np.abs(directions).sum(axis=1) > 0
    # column for wave vector k: direction_k[c] * wave_k[x], flattened as (c, x)
    columns = directions[keep][:, :, None] * waves[keep][:, None, :]
    return columns.reshape(int(keep.sum()), d * n).T


def _batched_gamma1(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    khat = _unit_wavevectors(geometry)[None]
    axes = tuple(range(2, geometry.dim + 2))
    fh = np.fft.fftn(values, axes=axes)
    along = (khat * fh).sum(axis=1, keepdims=True)
    return np.fft.ifftn(khat * along, axes=axes)


def dense_assemble(medium: TwoPhaseMedium, batch: int = 256) -> DenseOperator:
    """Column ``j`` is ``A`` applied to the ``j``-th unit field."""
    geometry = medium.geometry
    d = geometry.dim
    size = d * geometry.size
    if size > MAX_DENSE_SIZE:
        raise ValueError(
            f"dense assembly of a {size}x{size} matrix exceeds the limit {MAX_DENSE_SIZE}"
        )
    chi = medium.chi1
    matrix = np.empty((size, size), dtype=complex)
    shape = (d,) + geometry.cells
    for start in range(0, size, batch):
        stop = min(size, start + batch)
        unit = np.zeros((stop - start, size), dtype=complex)
        unit[np.arange(stop - start), np.arange(start, stop)] = 1.0
        unit = unit.reshape((stop - start,) + shape)
        cols = _batched_gamma1(chi * _batched_gamma1(unit, geometry), geometry)
        matrix[:, start:stop] = cols.reshape(stop - start, size).T
    return DenseOperator(geometry, matrix)


def dense_spectrum(op: DenseOperator) -> np.ndarray:
    """Ascending eigenvalues of ``A`` restricted to gradient fields."""
    if not op.is_hermitian():
        raise ValueError("the dense oracle spectrum is only defined for Hermitian operators")
    return np.linalg.eigvalsh(op.restricted())


def dense_bounds(op: DenseOperator) -> SpectralBounds:
    values = dense_spectrum(op)
    return clamped_bounds(values[0], values[-1], Provenance.EXACT_DENSE)


def dense_resolvent(op: DenseOperator, z0: complex, s: Field) -> Field:
    """Solve ``(z0 gamma1 - A) x = gamma1 s`` for ``x`` among gradient fields."""
    if s.geometry != op.geometry or s.components != op.geometry.dim:
        raise ValueError("source does not match the operator's field shape")
    q = op.gradient_basis
    block = op.restricted()
    system = z0 * np.eye(block.shape[0]) - block
    rhs = q.conj().T @ s.values.reshape(-1)
    sigma = np.linalg.svd(system, compute_uv=False)
    try:
        if sigma[-1] <= 1e-13 * (abs(z0) + np.abs(block).max()):
            raise np.linalg.LinAlgError
        coeff = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvals(block)
        nearest = complex(eig[np.argmin(np.abs(eig - z0))])
        raise SingularResolventError(complex(z0), nearest) from None
    return s.with_values((q @ coeff).reshape(s.values.shape))


def dense_two_phase_resolvent(op: DenseOperator, z1: complex, z2: complex, s: Field) -> Field:
    """``(gamma1 L gamma1)^{-1} s`` on gradient fields for moduli ``z1, z2``."""
    if z1 == z2:
        return gamma_project(s) / z2
    gap = z2 - z1
    return dense_resolvent(op, z2 / gap, s) / gap


def gamma_project(s: Field) -> Field:
    return s.with_values(gamma1_array(s.values, s.geometry))


# -- power method -------------------------------------------------------------


def _start_field(geometry: GridGeometry, rng: np.random.Generator) -> Field:
    for _ in range(2):
        x = gamma_project(random_field(geometry, geometry.dim, rng))
        norm = field_norm(x)
        if norm > 0:
            return x / norm
    raise ValueError("random start field has no gradient component")


def _dominant(apply: Callable[[Field], Field], x: Field, iters: int) -> tuple[float, int]:
    value = 0.0
    for i in range(1, iters + 1):
        y = apply(x)
        value = inner_product(x, y).real
        norm = field_norm(y)
        if norm == 0:
            return 0.0, i
        x = y / norm
    return value, iters


def power_method_extremes(medium: TwoPhaseMedium, iters: int = 500, seed: int = 0) -> SpectralBounds:
    """Estimate ``[a-, a+]``: ``a+`` by power iteration, ``a-`` from the shifted ``mu - A``."""
    if iters < 1:
        raise ValueError("power method needs at least one iteration")
    rng = np.random.default_rng(seed)
    geometry = medium.geometry
    x = _start_field(geometry, rng)
    a_plus, used = _dominant(lambda f: apply_A(medium, f), x, iters)
    mu = 1.01 * a_plus
    x = _start_field(geometry, rng)
    top, used_low = _dominant(lambda f: mu * f - apply_A(medium, f), x, iters)
    return clamped_bounds(mu - top, a_plus, Provenance.POWER_METHOD, used + used_low)


def operator_norm_estimate(
    W: Callable[[Field], Field],
    geometry: GridGeometry,
    components: int,
    iters: int = 200,
    seed: int = 0,
    adjoint: Callable[[Field], Field] | None = None,
) -> float:
    """Power-method estimate of the operator 2-norm of ``W``.

    With an adjoint this iterates on ``W* W``; otherwise it reports the
    growth rate ``|W^n x|^(1/n)``, which tends to the spectral radius.
    """
    rng = np.random.default_rng(seed)
    x = random_field(geometry, components, rng)
    x = x / field_norm(x)
    if adjoint is not None:
        estimate = 0.0
        for _ in range(iters):
            y = adjoint(W(x))
            previous, estimate = estimate, np.sqrt(max(inner_product(x, y).real, 0.0))
            norm = field_norm(y)
            if norm == 0:
                return 0.0
            x = y / norm
            if abs(estimate - previous) <= 1e-15 * max(estimate, 1.0):
                break
        return float(estimate)
    log_growth = 0.0
    for _ in range(iters):
        x = W(x)
        norm = field_norm(x)
        if norm == 0:
            return 0.0
        log_growth += np.log(norm)
        x = x / norm
    return float(np.exp(log_growth / iters))


def write_eigenvalues_csv(path: str | Path, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, f"{float(np.real(v)):.17g}"])
