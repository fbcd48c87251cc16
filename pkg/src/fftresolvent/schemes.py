"""Series solvers for ``(gamma1 L gamma1)^{-1} s`` on gradient fields.

Every scheme is a fixed-point iteration ``q <- W q + src`` followed by a
fixed output map ``x = C0 q``.  Results are returned in physical scaling,
``x = (gamma1 L gamma1)^{-1} s``; multiplying by ``z2 - z1`` gives the
resolvent ``(z0 gamma1 - A)^{-1} s`` with ``z0 = z2 / (z2 - z1)``.  The
backward residual ``|gamma1 L gamma1 x - s| / |s|`` is the same in both
scalings and is the stopping criterion for all schemes.
"""

from __future__ import annotations

import cmath
import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .grid import Field, constant, field_norm, zeros
from .media import TwoPhaseMedium, apply_L
from .projection import gamma1_array
from .rates import (
    BoundsBox,
    bounds_to_interval,
    map_chain,
    rate_shift,
    substitution_params,
)
from .spectral import SpectralBounds

Operator = Callable[[Field], Field]

MIN_FIT_POINTS = 6


class SchemeKind(str, Enum):
    NEUMANN = "neumann"
    SHIFTED = "shifted"
    EYRE_MILTON = "eyre_milton"
    SPECTRAL = "spectral"


class DivergenceError(ArithmeticError):
    """Non-finite values appeared in an iteration."""

    def __init__(self, scheme: str, iteration: int):
        super().__init__(f"{scheme} iteration produced non-finite values at iteration {iteration}")
        self.scheme = scheme
        self.iteration = iteration


class NonConvergenceError(RuntimeError):
    def __init__(self, report: "IterationReport"):
        super().__init__(
            f"{report.scheme} did not converge in {report.iterations} iterations "
            f"(last residual {report.residual_history[-1]:.3e})"
        )
        self.report = report


@dataclass(frozen=True)
class SolveConfig:
    medium: TwoPhaseMedium
    scheme: SchemeKind = SchemeKind.EYRE_MILTON
    tolerance: float = 1e-10
    max_iter: int = 1000
    bounds: SpectralBounds | None = None
    shift: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeKind(self.scheme))
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.scheme is SchemeKind.SPECTRAL and self.bounds is None:
            raise ValueError("the spectral scheme needs spectral bounds")


@dataclass
class IterationReport:
    scheme: str
    iterations: int
    residual_history: list[float]
    measured_rate: float
    theoretical_rate: float
    converged: bool
    increment_history: list[float] = field(default_factory=list)
    rate_flag: str | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "iterations": self.iterations,
            "measured_rate": self.measured_rate,
            "theoretical_rate": self.theoretical_rate,
            "converged": self.converged,
            "rate_flag": self.rate_flag,
            "warnings": list(self.warnings),
        }


def fit_rate(history: Sequence[float]) -> tuple[float, str | None]:
    """Geometric contraction from a least-squares fit of ``log residual`` over the trailing half."""
    values = np.asarray(history, dtype=float)
    tail = values[len(values) // 2 :]
    tail = tail[tail > 0]
    if tail.size < MIN_FIT_POINTS:
        return 0.0, f"fewer than {MIN_FIT_POINTS} residuals in the fit window"
    slope = np.polyfit(np.arange(tail.size), np.log(tail), 1)[0]
    return float(np.exp(slope)), None


def _finite(f: Field) -> bool:
    return bool(np.isfinite(f.values).all())


def iterate_generic(
    W: Operator,
    C0: Operator,
    s: Field,
    tolerance: float,
    max_iter: int,
    residual: Callable[[Field], float] | None = None,
    scheme: str = "generic",
    theoretical_rate: float = math.nan,
    scale: float | None = None,
) -> tuple[Field, IterationReport]:
    """Sum the series ``C0 (s + W s + W^2 s + ...)`` until the residual drops below ``tolerance``.

    Starting from ``q = 0`` the first update gives ``q = s``.  Entry ``i`` of
    the residual history belongs to the output after ``i`` updates beyond
    that, so the history has ``iterations + 1`` entries.  With no
    ``residual`` callback the relative increment ``|q_new - q| / scale`` is
    used instead.
    """
    if scale is None:
        scale = field_norm(s)
    if scale == 0:
        scale = 1.0
    q = s
    x = C0(q)
    increments = [field_norm(s) / scale]
    history = [residual(x) if residual else increments[0]]
    converged = residual is not None and history[0] <= tolerance
    iterations = 0
    while not converged and iterations < max_iter:
        iterations += 1
        q_new = W(q) + s
        if not _finite(q_new):
            raise DivergenceError(scheme, iterations)
        increments.append(field_norm(q_new - q) / scale)
        q = q_new
        x = C0(q)
        history.append(residual(x) if residual else increments[-1])
        if not math.isfinite(history[-1]):
            raise DivergenceError(scheme, iterations)
        converged = history[-1] <= tolerance
    rate, flag = fit_rate(history)
    report = IterationReport(
        scheme=scheme,
        iterations=iterations,
        residual_history=history,
        measured_rate=rate,
        theoretical_rate=theoretical_rate,
        converged=converged,
        increment_history=increments,
        rate_flag=flag,
    )
    return x, report


def series_coefficients(W: Operator, s: Field, n: int) -> list[Field]:
    """``[s, W s, ..., W^n s]``."""
    if n < 0:
        raise ValueError("number of series terms must be nonnegative")
    terms = [s]
    for _ in range(n):
        terms.append(W(terms[-1]))
    return terms


def evaluate_series(coefficients: Sequence[Field], c: complex, C0: Operator | None = None) -> Field:
    """``C0 sum_j c^j q_j``, evaluated by Horner's rule."""
    total = coefficients[-1]
    for term in reversed(coefficients[:-1]):
        total = term + c * total
    return C0(total) if C0 is not None else total


# -- shared two-phase helpers -------------------------------------------------


def project(f: Field) -> Field:
    return f.with_values(gamma1_array(f.values, f.geometry))


def backward_residual(medium: TwoPhaseMedium, s: Field) -> Callable[[Field], float]:
    scale = field_norm(s) or 1.0

    def residual(x: Field) -> float:
        lx = medium.modulus() * gamma1_array(x.values, x.geometry)
        return field_norm(x.with_values(gamma1_array(lx, x.geometry) - s.values)) / scale

    return residual


def _check_source(medium: TwoPhaseMedium, s: Field) -> None:
    if s.geometry != medium.geometry:
        raise ValueError("source and medium live on different grids")
    if s.components != medium.geometry.dim:
        raise ValueError(f"source needs {medium.geometry.dim} components, got {s.components}")


def _trivial(cfg: SolveConfig, s: Field, theoretical: float) -> tuple[Field, IterationReport] | None:
    """Zero source or homogeneous medium: answer without iterating."""
    medium = cfg.medium
    if field_norm(s) == 0:
        report = IterationReport(cfg.scheme.value, 0, [0.0], 0.0, theoretical, True)
        return zeros(s.geometry, s.components), report
    if medium.is_homogeneous:
        x = s / medium.z2
        res = backward_residual(medium, s)(x)
        report = IterationReport(
            cfg.scheme.value, 0, [res], 0.0, 0.0, True, rate_flag="homogeneous medium"
        )
        return x, report
    return None


def _pointwise(values: np.ndarray) -> Operator:
    return lambda f: f.with_values(f.values * values)


# -- the schemes --------------------------------------------------------------


def solve_neumann(cfg: SolveConfig, s: Field) -> tuple[Field, IterationReport]:
    """Expansion about the phase-2 reference medium."""
    medium = cfg.medium
    _check_source(medium, s)
    s = project(s)
    t = medium.contrast if medium.z2 != 0 else math.inf
    rate = abs(1 - t)
    trivial = _trivial(cfg, s, rate)
    if trivial:
        return trivial
    if medium.z2 == 0:
        raise ValueError("the Neumann expansion needs z2 != 0")
    factor = (1 - t) * medium.chi1
    geometry = medium.geometry

    def W(q: Field) -> Field:
        return q.with_values(gamma1_array(factor * q.values, geometry))

    x, report = iterate_generic(
        W,
        lambda q: q / medium.z2,
        s,
        cfg.tolerance,
        cfg.max_iter,
        residual=backward_residual(medium, s),
        scheme=cfg.scheme.value,
        theoretical_rate=rate,
    )
    if rate >= 1:
        report.warnings.append(f"Neumann rate |1 - z1/z2| = {rate:.6g} is not below 1")
    return x, report


def shifted_reference(medium: TwoPhaseMedium, c: float) -> complex:
    """Reference modulus of the expansion whose spectral shift is ``c``."""
    return medium.z2 - c * (medium.z2 - medium.z1)


def solve_shifted(cfg: SolveConfig, s: Field) -> tuple[Field, IterationReport]:
    """Expansion about a shifted reference medium, by default ``(z1 + z2) / 2``."""
    medium = cfg.medium
    _check_source(medium, s)
    s = project(s)
    c = cfg.shift
    if not medium.is_homogeneous:
        rate = rate_shift(BoundsBox(0.0, 1.0, medium.z0), c)
    else:
        rate = 0.0
    trivial = _trivial(cfg, s, rate)
    if trivial:
        return trivial
    ref = shifted_reference(medium, c)
    if ref == 0:
        raise ValueError(f"shift {c} puts the reference modulus at zero")
    factor = (ref - medium.modulus()) / ref
    geometry = medium.geometry

    def W(q: Field) -> Field:
        return q.with_values(gamma1_array(factor * q.values, geometry))

    x, report = iterate_generic(
        W,
        lambda q: q / ref,
        s,
        cfg.tolerance,
        cfg.max_iter,
        residual=backward_residual(medium, s),
        scheme=cfg.scheme.value,
        theoretical_rate=rate,
    )
    if rate >= 1:
        report.warnings.append(f"shifted rate {rate:.6g} is not below 1")
    return x, report


def eyre_milton_parameters(medium: TwoPhaseMedium) -> tuple[complex, complex]:
    """``(z_ref, v)`` with ``z_ref = z2 sqrt(z1/z2)`` and ``v = (sqrt(t)-1)/(sqrt(t)+1)``."""
    if medium.z1 * medium.z2 == 0:
        raise ValueError("the accelerated scheme needs z1 z2 != 0")
    root = cmath.sqrt(medium.contrast)
    z_ref = medium.z2 * root
    if medium.z1 + z_ref == 0 or medium.z2 + z_ref == 0:
        raise ValueError("L + z_ref is singular in one phase")
    return z_ref, (root - 1) / (root + 1)


def solve_eyre_milton(cfg: SolveConfig, s: Field) -> tuple[Field, IterationReport]:
    """Accelerated scheme built from two reflections, ``W = v (2 chi1 - I)(I - 2 gamma1)``."""
    medium = cfg.medium
    _check_source(medium, s)
    s = project(s)
    trivial = _trivial(cfg, s, 0.0)
    if trivial:
        return trivial
    z_ref, v = eyre_milton_parameters(medium)
    geometry = medium.geometry
    sign = v * (2 * medium.chi1 - 1)
    src = s.with_values(s.values / (medium.modulus() + z_ref))

    def W(q: Field) -> Field:
        reflected = q.values - 2 * gamma1_array(q.values, geometry)
        return q.with_values(sign * reflected)

    def C0(q: Field) -> Field:
        return q.with_values(2 * gamma1_array(q.values, geometry))

    x, report = iterate_generic(
        W,
        C0,
        src,
        cfg.tolerance,
        cfg.max_iter,
        residual=backward_residual(medium, s),
        scheme=cfg.scheme.value,
        theoretical_rate=abs(v),
        scale=field_norm(s),
    )
    t = medium.contrast
    if t.imag == 0 and t.real < 0:
        report.warnings.append("negative real contrast: the accelerated scheme cannot converge")
    return x, report


# -- the substitution (triple-field) scheme ------------------------------------


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Three stacked ``d``-component slots with the rank-one projection ``chi1 p p^T``.

    Slot 0 carries the physical field; the projection acts across slots at
    every phase-1 cell and vanishes in phase 2.
    """

    medium: TwoPhaseMedium
    weights: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return np.sqrt(self.weights.astype(complex))

    @property
    def d(self) -> int:
        return self.medium.geometry.dim

    def slots(self, values: np.ndarray) -> np.ndarray:
        return values.reshape((3, self.d) + self.medium.geometry.cells)

    def embed(self, f: Field) -> Field:
        values = np.zeros((3 * self.d,) + f.geometry.cells, dtype=complex)
        values[: self.d] = f.values
        return Field(f.geometry, values)

    def slot(self, f: Field, index: int) -> Field:
        return Field(f.geometry, self.slots(f.values)[index])

    def _lambda(self, values: np.ndarray, p: np.ndarray) -> np.ndarray:
        slots = self.slots(values)
        # p^T contracted without conjugation: the projection is not selfadjoint
        along = np.einsum("i,i...->...", p, slots)
        out = np.einsum("i,...->i...", p, along) * self.medium.chi1
        return out.reshape(values.shape)

    def apply_lambda(self, f: Field) -> Field:
        return f.with_values(self._lambda(f.values, self.p))

    def apply_gamma(self, f: Field) -> Field:
        """Block projection ``diag(gamma1, I, 0)``."""
        slots = self.slots(f.values)
        out = np.zeros_like(slots)
        out[0] = gamma1_array(slots[0], f.geometry)
        out[1] = slots[1]
        return f.with_values(out.reshape(f.values.shape))

    def _reflect(self, values: np.ndarray, geometry) -> np.ndarray:
        slots = self.slots(values).copy()
        slots[0] = slots[0] - 2 * gamma1_array(slots[0], geometry)
        slots[1] = -slots[1]
        return slots.reshape(values.shape)

    def reflection_product(self, f: Field) -> Field:
        """``(2 Lambda - I)(I - 2 Gamma)``."""
        r = self._reflect(f.values, f.geometry)
        return f.with_values(2 * self._lambda(r, self.p) - r)

    def reflection_product_adjoint(self, f: Field) -> Field:
        """``(I - 2 Gamma)(2 Lambda* - I)``; ``Lambda*`` uses the conjugate weights."""
        u = 2 * self._lambda(f.values, np.conj(self.p)) - f.values
        return f.with_values(self._reflect(u, f.geometry))

    def apply_shifted_inverse(self, f: Field, c: complex, d: complex) -> Field:
        """``(c I + d Lambda)^{-1}`` via ``(1/c)(I - d/(c+d) Lambda)``."""
        lam = self._lambda(f.values, self.p)
        return f.with_values((f.values - (d / (c + d)) * lam) / c)


def augmented_system(medium: TwoPhaseMedium, bounds: SpectralBounds) -> AugmentedSystem:
    alpha, beta = interval_from_bounds(bounds)
    params = substitution_params(alpha, beta)
    if params.degenerate:
        raise ValueError("degenerate bounds have no augmented system")
    return AugmentedSystem(medium, params.weights)


LOWER_BOUND_FLOOR = 1e-12


def interval_from_bounds(bounds: SpectralBounds) -> tuple[float, float]:
    a_minus = 0.0 if bounds.a_minus <= LOWER_BOUND_FLOOR else bounds.a_minus
    return bounds_to_interval(a_minus, bounds.a_plus)


def solve_spectral(cfg: SolveConfig, s: Field) -> tuple[Field, IterationReport]:
    """Substitution scheme exploiting spectral bounds ``[a-, a+]`` of ``A``."""
    medium = cfg.medium
    _check_source(medium, s)
    s = project(s)
    bounds = cfg.bounds
    trivial = _trivial(cfg, s, 0.0)
    if trivial:
        return trivial
    residual = backward_residual(medium, s)
    if bounds.a_minus == bounds.a_plus:
        # A acts as a multiple of the identity on gradient fields
        a = bounds.a_plus
        x = s / ((1 - a) * medium.z2 + a * medium.z1)
        res = residual(x)
        report = IterationReport(
            cfg.scheme.value,
            1,
            [1.0, res],
            0.0,
            0.0,
            res <= cfg.tolerance,
            rate_flag="degenerate bounds",
        )
        return x, report
    alpha, beta = interval_from_bounds(bounds)
    point = map_chain(medium.contrast, alpha, beta)
    z_under, w, v = point.underline, point.w, point.v
    system = AugmentedSystem(medium, substitution_params(alpha, beta).weights)
    src = system.apply_shifted_inverse(system.embed(s), 1 + w, z_under - 1)
    geometry = medium.geometry

    def W(q: Field) -> Field:
        return v * system.reflection_product(q)

    def C0(q: Field) -> Field:
        head = system.slots(q.values)[0]
        return Field(geometry, 2 * gamma1_array(head, geometry) / medium.z2)

    x, report = iterate_generic(
        W,
        C0,
        src,
        cfg.tolerance,
        cfg.max_iter,
        residual=residual,
        scheme=cfg.scheme.value,
        theoretical_rate=abs(v),
        scale=field_norm(s),
    )
    return x, report


SOLVERS = {
    SchemeKind.NEUMANN: solve_neumann,
    SchemeKind.SHIFTED: solve_shifted,
    SchemeKind.EYRE_MILTON: solve_eyre_milton,
    SchemeKind.SPECTRAL: solve_spectral,
}


def solve(cfg: SolveConfig, s: Field) -> tuple[Field, IterationReport]:
    return SOLVERS[cfg.scheme](cfg, s)


def resolvent_from_solution(medium: TwoPhaseMedium, x: Field) -> Field:
    """Rescale ``(gamma1 L gamma1)^{-1} s`` to ``(z0 gamma1 - A)^{-1} s``."""
    return x * (medium.z2 - medium.z1)


# -- derived quantities ---------------------------------------------------------


def effective_tensor(
    medium: TwoPhaseMedium,
    scheme: SchemeKind | str = SchemeKind.EYRE_MILTON,
    tolerance: float = 1e-10,
    max_iter: int = 5000,
    bounds: SpectralBounds | None = None,
) -> np.ndarray:
    """Effective modulus matrix of a periodic two-phase medium.

    Column ``j`` is the mean of ``L E`` for the field ``E = e_j + E_f`` whose
    fluctuation ``E_f`` is the gradient field making ``L E`` divergence-free.

    Storing Nyquist wave vectors as ``+n/2`` breaks conjugation symmetry on
    even grids, so the result is averaged with the ``-n/2`` choice, which
    equals ``conj`` of the tensor of the conjugate medium.  Real media then
    give real symmetric tensors.
    """
    plus = _effective_tensor_once(medium, scheme, tolerance, max_iter, bounds)
    if medium.z1.imag == 0 and medium.z2.imag == 0:
        minus = np.conj(plus)
    else:
        mirror = medium.with_moduli(np.conj(medium.z1), np.conj(medium.z2))
        minus = np.conj(_effective_tensor_once(mirror, scheme, tolerance, max_iter, bounds))
    return 0.5 * (plus + minus)


def _effective_tensor_once(medium, scheme, tolerance, max_iter, bounds) -> np.ndarray:
    d = medium.geometry.dim
    cfg = SolveConfig(medium, scheme, tolerance, max_iter, bounds)
    sigma = np.empty((d, d), dtype=complex)
    for j in range(d):
        applied = constant(medium.geometry, np.eye(d)[j])
        source = -project(apply_L(medium, applied))
        fluct, report = solve(cfg, source)
        if not report.converged:
            raise NonConvergenceError(report)
        flux = apply_L(medium, applied + fluct)
        sigma[:, j] = flux.values.reshape(d, -1).mean(axis=1)
    return sigma


def function_of_operator(
    medium: TwoPhaseMedium,
    f: Callable[[complex], complex],
    s: Field,
    nodes: int = 64,
    bounds: SpectralBounds | None = None,
    margin: float = 0.5,
    tolerance: float = 1e-13,
    max_iter: int = 2000,
) -> Field:
    """``f(A) s`` from the Cauchy integral of ``f(z) (z gamma1 - A)^{-1} s`` on a circle.

    The circle is centred on the midpoint of the spectral bounds (``[0, 1]``
    when none are given) with radius half their width plus ``margin``.  Each
    node is a two-phase solve with moduli ``(z - 1, z)``.
    """
    _check_source(medium, s)
    if nodes < 1:
        raise ValueError("quadrature needs at least one node")
    if not margin > 0:
        raise ValueError("contour margin must be positive so the circle clears the spectrum")
    lo, hi = (0.0, 1.0) if bounds is None else (bounds.a_minus, bounds.a_plus)
    centre = 0.5 * (lo + hi)
    radius = 0.5 * (hi - lo) + margin
    for crossing in (centre - radius, centre + radius):
        if 0 < crossing <= 1:
            raise ValueError(
                f"contour crosses the real axis at {crossing:.6g}, inside (0, 1] where "
                "the accelerated solves break down"
            )
    s = project(s)
    total = np.zeros_like(s.values)
    for k in range(nodes):
        phase = cmath.exp(2j * math.pi * k / nodes)
        z = centre + radius * phase
        node = SolveConfig(medium.with_moduli(z - 1, z), SchemeKind.EYRE_MILTON, tolerance, max_iter)
        x, report = solve_eyre_milton(node, s)
        if not report.converged:
            raise NonConvergenceError(report)
        total += f(z) * radius * phase * x.values
    return s.with_values(total / nodes)


def polynomial(coefficients: Sequence[complex]) -> Callable[[complex], complex]:
    """``z -> c0 + c1 z + c2 z^2 + ...``."""
    coefficients = list(coefficients)

    def f(z: complex) -> complex:
        total = 0j
        for c in reversed(coefficients):
            total = total * z + c
        return total

    return f


# -- output ------------------------------------------------------------------


def write_residual_csv(path: str | Path, report: IterationReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "residual", "contraction_estimate"])
        previous = None
        for i, r in enumerate(report.residual_history):
            ratio = "" if not previous else f"{r / previous:.17g}"
            writer.writerow([i, f"{r:.17g}", ratio])
            previous = r


def write_report_json(path: str | Path, document: dict) -> None:
    Path(path).write_text(json.dumps(document, indent=2) + "\n")
