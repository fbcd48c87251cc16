"""Scalar convergence-rate theory for the resolvent series.

Everything here is a pure function of a few complex numbers.  For the
two-phase model with spectrum inside ``[0, 1]`` the q-factor collapses to the
contrast itself, ``q = t = z1/z2``, which is what :func:`map_chain` uses.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

INF = math.inf


class PoleError(ValueError):
    """The contrast sits on the pole ``t = -beta`` of the substitution map."""


@dataclass(frozen=True)
class BoundsBox:
    """Spectral bounds ``b_minus <= b_plus`` of the local operator and the reference value ``z0``."""

    b_minus: float
    b_plus: float
    z0: complex

    def __post_init__(self):
        if self.b_minus > self.b_plus:
            raise ValueError(f"b_minus={self.b_minus} exceeds b_plus={self.b_plus}")
        object.__setattr__(self, "z0", complex(self.z0))


def _ratio_abs(num: complex, den: complex) -> float:
    if den == 0:
        return 0.0 if num == 0 else INF
    return abs(num / den)


def q_factor(box: BoundsBox) -> complex:
    """``(z0 - b+) / (z0 - b-)``.

    The shifted and accelerated rates are unchanged by ``q -> 1/q``.
    """
    if box.z0 == box.b_minus:
        raise ValueError("q is undefined when z0 equals the lower bound")
    return (box.z0 - box.b_plus) / (box.z0 - box.b_minus)


def rate_neumann(box: BoundsBox) -> float:
    """Contraction of the plain expansion in powers of ``A / z0``."""
    if box.z0 == box.b_minus:
        raise ValueError("q is undefined when z0 equals the lower bound")
    if box.z0 == 0:
        return INF
    return max(abs(box.b_minus), abs(box.b_plus)) / abs(box.z0)


def rate_shift(box: BoundsBox, c: complex) -> float:
    """Contraction of the expansion about the shifted reference ``c``."""
    if box.z0 == box.b_minus:
        raise ValueError("q is undefined when z0 equals the lower bound")
    spread = max(abs(box.b_plus - c), abs(box.b_minus - c))
    return _ratio_abs(spread, box.z0 - c)


def rate_from_q(q: complex) -> float:
    return _ratio_abs(q - 1, q + 1)


def accelerated_from_q(q: complex) -> float:
    w = cmath.sqrt(q)
    return _ratio_abs(w - 1, w + 1)


def rate_shifted(box: BoundsBox) -> float:
    """``|(q - 1)/(q + 1)|``: the optimally shifted rate."""
    return rate_from_q(q_factor(box))


def rate_accelerated(box: BoundsBox) -> float:
    """``|(sqrt(q) - 1)/(sqrt(q) + 1)|`` with the principal root."""
    return accelerated_from_q(q_factor(box))


def optimal_shift(box: BoundsBox) -> complex:
    """Midpoint shift minimising :func:`rate_shift` for real bounds."""
    return 0.5 * (box.b_minus + box.b_plus)


# -- bounds to singular interval ---------------------------------------------


def bounds_to_interval(a_minus: float, a_plus: float) -> tuple[float, float]:
    """Map spectral bounds ``[a-, a+]`` to the singular contrast interval ``[-beta, -alpha]``.

    A spectral value ``a`` is singular at contrast ``t = -(1/a - 1)``, so
    ``alpha = 1/a+ - 1`` and ``beta = 1/a- - 1`` (infinite when ``a- = 0``).
    """
    if a_minus < 0 or a_plus > 1:
        raise ValueError(f"bounds must lie in [0, 1], got ({a_minus}, {a_plus})")
    if a_minus > a_plus:
        raise ValueError(f"a_minus={a_minus} exceeds a_plus={a_plus}")
    if a_plus == 0:
        raise ValueError("a_plus must be positive")
    alpha = 1.0 / a_plus - 1.0
    beta = INF if a_minus == 0 else 1.0 / a_minus - 1.0
    return alpha, beta


@dataclass(frozen=True)
class SubstitutionParams:
    """Weights ``p_i^2`` of the rank-one projection for the interval ``[-beta, -alpha]``.

    ``degenerate`` marks ``alpha == beta``, where the weights are undefined
    and the scheme converges in one step.
    """

    alpha: float
    beta: float
    p1_sq: complex
    p2_sq: complex
    p3_sq: complex
    degenerate: bool = False

    @property
    def beta_infinite(self) -> bool:
        return math.isinf(self.beta)

    def underline_ratio(self, t: complex) -> complex:
        """Contrast of the substituted problem, ``(t+alpha)(1+beta) / ((t+beta)(1+alpha))``."""
        t = complex(t)
        if self.beta_infinite:
            return (t + self.alpha) / (1.0 + self.alpha)
        if t == -self.beta:
            raise PoleError(f"t = {-self.beta} is the pole of the substitution map")
        return (t + self.alpha) * (1.0 + self.beta) / ((t + self.beta) * (1.0 + self.alpha))

    def underline_ratio_from_moduli(self, z1: complex, z2: complex) -> complex:
        """Same ratio assembled from the projection weights and the moduli."""
        if self.degenerate:
            return 1.0 + 0j
        den = self.p1_sq * z2 - self.p2_sq * (z1 - z2)
        if den == 0:
            raise PoleError("substituted contrast is singular for these moduli")
        return 1.0 + (z1 - z2) / den

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.p1_sq, self.p2_sq, self.p3_sq], dtype=complex)


def substitution_params(alpha: float, beta: float) -> SubstitutionParams:
    if alpha < 0 or beta < alpha:
        raise ValueError(f"need 0 <= alpha <= beta, got ({alpha}, {beta})")
    if alpha == beta:
        nan = complex(math.nan, math.nan)
        return SubstitutionParams(alpha, beta, nan, nan, nan, degenerate=True)
    if math.isinf(beta):
        p1, p2 = 1.0 + alpha, 0.0
    else:
        span = beta - alpha
        p1 = (1.0 + alpha) * (1.0 + beta) / span
        p2 = -(1.0 + alpha) / span
    p3 = 1.0 - p1 - p2
    return SubstitutionParams(alpha, beta, complex(p1), complex(p2), complex(p3))


# -- the map chain t -> underline -> w -> v ------------------------------------


@dataclass(frozen=True)
class RatePoint:
    t: complex
    q: complex
    r0: float
    r1: float
    r2: float
    underline: complex
    w: complex
    v: complex

    @property
    def abs_v(self) -> float:
        return abs(self.v)


def map_chain(t: complex, alpha: float, beta: float) -> RatePoint:
    """Rates of every scheme at contrast ``t`` for the singular interval ``[-beta, -alpha]``."""
    t = complex(t)
    params = substitution_params(alpha, beta)
    underline = params.underline_ratio(t)
    w = cmath.sqrt(underline)
    v = (w - 1) / (w + 1)
    return RatePoint(
        t=t,
        q=t,
        r0=abs(1 - t),
        r1=rate_from_q(t),
        r2=accelerated_from_q(t),
        underline=underline,
        w=w,
        v=v,
    )


# -- coercivity ---------------------------------------------------------------


@dataclass(frozen=True)
class CoercivityData:
    """``Re(conj(u) L u) >= coercivity_alpha |u|^2`` and ``|L| <= norm_beta``."""

    coercivity_alpha: float
    norm_beta: float

    def __post_init__(self):
        if not self.norm_beta >= self.coercivity_alpha > 0:
            raise ValueError(
                f"need norm_beta >= coercivity_alpha > 0, got "
                f"({self.coercivity_alpha}, {self.norm_beta})"
            )


def coercivity_rate(data: CoercivityData) -> tuple[float, float]:
    """Return ``(sqrt(1 - (alpha/beta)^2), z0')`` with ``z0' = beta^2/alpha``."""
    ratio = data.coercivity_alpha / data.norm_beta
    rate = math.sqrt(max(0.0, 1.0 - ratio * ratio))
    return rate, data.norm_beta**2 / data.coercivity_alpha


# -- spectrum normalisation ---------------------------------------------------


@dataclass(frozen=True)
class Rescaling:
    """Affine map ``x -> (x - shift) / scale`` applied to bounds and ``z0`` alike."""

    shift: float
    scale: float

    def apply(self, x):
        return (x - self.shift) / self.scale

    def invert(self, y):
        return y * self.scale + self.shift

    def box(self, box: BoundsBox) -> BoundsBox:
        return BoundsBox(self.apply(box.b_minus), self.apply(box.b_plus), self.apply(box.z0))


def unit_interval_rescaling(b_minus: float, b_plus: float) -> Rescaling:
    """Rescaling that sends ``[b-, b+]`` onto ``[0, 1]``."""
    if not b_plus > b_minus:
        raise ValueError("rescaling needs b_plus > b_minus")
    return Rescaling(b_minus, b_plus - b_minus)


def symmetric_rescaling(b_minus: float, b_plus: float) -> Rescaling:
    """Rescaling that sends ``[b-, b+]`` onto ``[-1, 1]``."""
    if not b_plus > b_minus:
        raise ValueError("rescaling needs b_plus > b_minus")
    return Rescaling(0.5 * (b_minus + b_plus), 0.5 * (b_plus - b_minus))


# -- contour atlas ------------------------------------------------------------

LEVEL_GUARD = 1e-12

ATLAS_COLUMNS = (
    "re_t",
    "im_t",
    "re_underline",
    "im_underline",
    "re_w",
    "im_w",
    "re_v",
    "im_v",
    "abs_v",
    "minus_inv_log_v",
    "r0",
    "r1",
    "r2",
    "pole",
)


@dataclass(frozen=True)
class ContourAtlas:
    alpha: float
    beta: float
    radius: float
    rows: tuple[tuple, ...]

    columns = ATLAS_COLUMNS

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([np.nan if r[index] is None else r[index] for r in self.rows], dtype=float)

    def nearest(self, t: complex) -> dict:
        re, im = self.column("re_t"), self.column("im_t")
        i = int(np.argmin((re - t.real) ** 2 + (im - t.imag) ** 2))
        return dict(zip(self.columns, self.rows[i]))


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def contour_atlas(
    alpha: float,
    beta: float,
    window: tuple[float, float, float, float] = (-4.0, 4.0, -4.0, 4.0),
    resolution: int | tuple[int, int] = 101,
    estimated: tuple[float, float] | None = None,
) -> ContourAtlas:
    """Sample the map chain on a rectangle of the contrast plane.

    The level value is ``-1/log(|v|/r_0)``; it is left blank where
    ``|v| >= r_0``.  ``r_0 = 1`` for exact bounds, and for estimated bounds
    with relative slacks ``(d_l, d_r)`` it is ``min(1 - d_l, 1 - d_r)``.
    Cells on the pole ``t = -beta`` are flagged instead of failing.
    """
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    if nx < 2 or ny < 2:
        raise ValueError("atlas resolution must be at least 2 per axis")
    re0, re1, im0, im1 = window
    if not (re1 > re0 and im1 > im0):
        raise ValueError(f"degenerate window {window}")
    radius = 1.0
    if estimated is not None:
        d_l, d_r = estimated
        radius = min(1.0 - d_l, 1.0 - d_r)
        if not 0 < radius <= 1:
            raise ValueError(f"estimated-bound slacks {estimated} give no convergence radius")
    rows = []
    for im in _axis(im0, im1, ny):
        for re in _axis(re0, re1, nx):
            t = complex(re, im)
            try:
                p = map_chain(t, alpha, beta)
            except PoleError:
                rows.append((re, im) + (None,) * 11 + (1,))
                continue
            abs_v = abs(p.v)
            level = None
            # points mapped onto the circle land within rounding of it
            if abs_v < radius * (1 - LEVEL_GUARD):
                level = 0.0 if abs_v == 0 else -1.0 / math.log(abs_v / radius)
            rows.append(
                (
                    re,
                    im,
                    p.underline.real,
                    p.underline.imag,
                    p.w.real,
                    p.w.imag,
                    p.v.real,
                    p.v.imag,
                    abs_v,
                    level,
                    p.r0,
                    p.r1,
                    p.r2,
                    0,
                )
            )
    return ContourAtlas(alpha, beta, radius, tuple(rows))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


def write_atlas_csv(path: str | Path, atlas: ContourAtlas) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(atlas.columns)
        for row in atlas.rows:
            writer.writerow([_cell(v) for v in row])


def read_atlas_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
