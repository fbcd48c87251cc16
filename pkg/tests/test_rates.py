import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fftresolvent.rates import (
    BoundsBox,
    CoercivityData,
    PoleError,
    accelerated_from_q,
    bounds_to_interval,
    contour_atlas,
    coercivity_rate,
    map_chain,
    q_factor,
    rate_accelerated,
    rate_from_q,
    rate_neumann,
    rate_shift,
    rate_shifted,
    read_atlas_csv,
    substitution_params,
    symmetric_rescaling,
    unit_interval_rescaling,
    write_atlas_csv,
)

INF = math.inf


def test_q_factor_examples():
    assert q_factor(BoundsBox(0, 1, -1)) == 2
    assert q_factor(BoundsBox(0, 1, 4 / 3)) == pytest.approx(0.25, abs=1e-15)
    assert q_factor(BoundsBox(0.3, 0.3, 2 + 1j)) == 1
    with pytest.raises(ValueError):
        q_factor(BoundsBox(0, 1, 0))
    with pytest.raises(ValueError):
        BoundsBox(1, 0, 2)


def test_rate_examples():
    assert rate_from_q(4) == pytest.approx(0.6, abs=1e-15)
    assert accelerated_from_q(4) == pytest.approx(1 / 3, abs=1e-15)
    assert rate_from_q(0.25) == pytest.approx(0.6, abs=1e-15)
    assert accelerated_from_q(0.25) == pytest.approx(1 / 3, abs=1e-15)
    assert rate_from_q(1) == accelerated_from_q(1) == 0


def test_rates_from_boxes():
    box = BoundsBox(0, 1, 4 / 3)  # contrast 1/4
    assert rate_neumann(box) == pytest.approx(0.75)
    assert rate_shifted(box) == pytest.approx(0.6)
    assert rate_accelerated(box) == pytest.approx(1 / 3)
    assert rate_shift(box, 0.5) == pytest.approx(0.6)
    assert rate_shift(box, 0.0) == pytest.approx(rate_neumann(box))


def test_accelerated_never_slower_on_log_grid():
    for q in np.logspace(-3, 3, 301):
        r1, r2 = rate_from_q(q), accelerated_from_q(q)
        assert r2 <= r1 + 1e-15
        if abs(q - 1) > 1e-9:
            assert r2 < r1
        assert abs(rate_from_q(1 / q) - r1) <= 1e-14
        assert abs(accelerated_from_q(1 / q) - r2) <= 1e-14


def test_bounds_to_interval_examples():
    assert bounds_to_interval(0.5, 0.5) == (1.0, 1.0)
    assert bounds_to_interval(0.0, 1.0) == (0.0, INF)
    alpha, beta = bounds_to_interval(1 / 3, 2 / 3)
    assert alpha == pytest.approx(0.5) and beta == pytest.approx(2.0)
    for bad in ((-0.1, 0.5), (0.2, 1.1), (0.6, 0.5)):
        with pytest.raises(ValueError):
            bounds_to_interval(*bad)


def test_substitution_params_examples():
    p = substitution_params(0.0, INF)
    assert (p.p1_sq, p.p2_sq, p.p3_sq) == (1, 0, 0)
    p = substitution_params(0.5, 2.0)
    assert (p.p1_sq, p.p2_sq, p.p3_sq) == pytest.approx((3, -1, -1))
    p = substitution_params(0.7, 0.7)
    assert p.degenerate
    assert p.underline_ratio(0.3) == pytest.approx(1)
    with pytest.raises(ValueError):
        substitution_params(2.0, 1.0)


@given(alpha=st.floats(0, 50), width=st.floats(1e-3, 100))
def test_projection_weights_sum_to_one(alpha, width):
    p = substitution_params(alpha, alpha + width)
    assert abs(p.p1_sq + p.p2_sq + p.p3_sq - 1) <= 1e-12 * max(1.0, abs(p.p1_sq))
    assert p.p2_sq.real <= 0


def _random_complex(rng, n):
    return rng.uniform(-3, 3, n) + 1j * rng.uniform(-3, 3, n)


def test_weights_reproduce_closed_form_ratio():
    rng = np.random.default_rng(3)
    for _ in range(50):
        alpha = rng.uniform(0, 3)
        beta = alpha + rng.uniform(0.01, 5)
        z1, z2 = _random_complex(rng, 2)
        p = substitution_params(alpha, beta)
        closed = p.underline_ratio(z1 / z2)
        assert abs(p.underline_ratio_from_moduli(z1, z2) - closed) <= 1e-12 * max(1, abs(closed))


def test_map_chain_examples():
    p = map_chain(1, 0.5, 2)
    assert (p.underline, p.w, p.v) == (1, 1, 0)
    p = map_chain(-0.5, 0.5, 2)
    assert p.underline == 0 and p.w == 0 and p.v == -1
    with pytest.raises(PoleError):
        map_chain(-2, 0.5, 2)


def test_singular_segment_maps_to_unit_circle():
    alpha, beta = 0.5, 2.0
    for j in range(100):
        t = -beta + (beta - alpha) * (j + 1) / 100
        assert abs(abs(map_chain(t, alpha, beta).v) - 1) <= 1e-10


def test_unconstrained_chain_matches_accelerated_ratio():
    rng = np.random.default_rng(5)
    for t in _random_complex(rng, 50):
        root = cmath.sqrt(t)
        assert abs(map_chain(t, 0, INF).v - (root - 1) / (root + 1)) <= 1e-12


def test_coercivity_examples():
    assert coercivity_rate(CoercivityData(1.0, 1.0))[0] == 0
    rate, z0 = coercivity_rate(CoercivityData(0.6, 1.0))
    assert rate == pytest.approx(0.8) and z0 == pytest.approx(1 / 0.6)
    assert coercivity_rate(CoercivityData(1, 2))[0] == pytest.approx(math.sqrt(3) / 2)
    with pytest.raises(ValueError):
        CoercivityData(2.0, 1.0)
    with pytest.raises(ValueError):
        CoercivityData(0.0, 1.0)


def test_rescalings():
    unit = unit_interval_rescaling(0.2, 0.7)
    assert unit.apply(0.2) == 0 and unit.apply(0.7) == pytest.approx(1)
    sym = symmetric_rescaling(0.2, 0.7)
    assert sym.apply(0.2) == pytest.approx(-1) and sym.apply(0.7) == pytest.approx(1)
    box = BoundsBox(0.2, 0.7, 1.5)
    assert rate_shifted(unit.box(box)) == pytest.approx(rate_shifted(box))
    assert unit.invert(unit.apply(0.37)) == pytest.approx(0.37)


def test_atlas_centre_and_segment():
    atlas = contour_atlas(0.5, 2.0, (-4, 4, -4, 4), 81)
    assert len(atlas.rows) == 81 * 81
    centre = atlas.nearest(1 + 0j)
    assert centre["abs_v"] < 1e-6
    re, im, abs_v = atlas.column("re_t"), atlas.column("im_t"), atlas.column("abs_v")
    on_segment = (im == 0) & (re > -2) & (re < -0.5)
    assert on_segment.sum() > 5
    assert (abs_v[on_segment] >= 1 - 1e-8).all()
    assert np.isnan(atlas.column("minus_inv_log_v")[on_segment]).all()
    pole = atlas.nearest(-2 + 0j)
    assert pole["pole"] == 1


def test_atlas_second_configuration_and_csv(tmp_path):
    atlas = contour_atlas(0.35, 0.8, (-2, 2, -1, 1), (5, 3))
    assert atlas.nearest(1 + 0j)["abs_v"] == 0
    path = tmp_path / "atlas.csv"
    write_atlas_csv(path, atlas)
    rows = read_atlas_csv(path)
    assert len(rows) == 15
    assert list(rows[0]) == list(atlas.columns)
    back = [float(r["abs_v"]) for r in rows if r["abs_v"]]
    assert back == [r[8] for r in atlas.rows if r[8] is not None]


def test_atlas_estimated_bounds_shrink_convergence_region():
    exact = contour_atlas(0.5, 2.0, (-3, 1, -1, 1), 41)
    estimated = contour_atlas(0.5, 2.0, (-3, 1, -1, 1), 41, estimated=(0.1, 0.2))
    assert estimated.radius == pytest.approx(0.8)
    blank = lambda a: np.isnan(a.column("minus_inv_log_v")).sum()
    assert blank(estimated) > blank(exact)
    with pytest.raises(ValueError):
        contour_atlas(0.5, 2.0, (-4, 4, -4, 4), 1)
