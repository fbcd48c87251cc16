import numpy as np
import pytest
from hypothesis import given, strategies as st

from fftresolvent.grid import (
    Field,
    GridGeometry,
    ShapeMismatchError,
    constant,
    field_norm,
    fourier_mode,
    inner_product,
    random_field,
)
from fftresolvent.projection import GammaOperator, apply_gamma1, apply_gamma2, apply_reflection

shapes = st.sampled_from([(2,), (7,), (4, 4), (5, 6), (3, 4, 2)])


def _random(shape, seed):
    g = GridGeometry(shape)
    return random_field(g, g.dim, np.random.default_rng(seed))


def test_constant_field_annihilated_by_gamma1_kept_by_gamma2():
    g = GridGeometry((4, 6))
    c = constant(g, [1.0, -2.0])
    assert field_norm(apply_gamma1(c)) < 1e-15
    assert field_norm(apply_gamma2(c) - c) < 1e-15


def test_single_mode_projection_by_hand():
    g = GridGeometry((8, 8))
    f = fourier_mode(g, [1, 0], [1, 1])
    expected = fourier_mode(g, [1, 0], [1, 0])
    assert field_norm(apply_gamma1(f) - expected) < 1e-14


def test_gradient_fields_are_fixed_points():
    g = GridGeometry((6, 5))
    total = None
    for k in ([1, 2], [-2, 1], [3, 0]):
        mode = fourier_mode(g, k, np.array(k, dtype=float) * (0.3 + 0.1j))
        total = mode if total is None else total + mode
    assert field_norm(apply_gamma1(total) - total) < 1e-13
    assert field_norm(apply_gamma2(total)) < 1e-13


def test_wrong_component_count_rejected():
    g = GridGeometry((4, 4))
    with pytest.raises(ShapeMismatchError):
        apply_gamma1(random_field(g, 3, np.random.default_rng(0)))


def test_gamma_operator_kinds():
    g = GridGeometry((4, 4))
    f = _random((4, 4), 1)
    assert field_norm(GammaOperator(g)(f) + GammaOperator(g, "gamma2")(f) - f) < 1e-13
    with pytest.raises(ValueError):
        GammaOperator(g, "gamma3")


@given(shape=shapes, seed=st.integers(0, 2**32 - 1))
def test_idempotent_and_partition_of_identity(shape, seed):
    f = _random(shape, seed)
    p = apply_gamma1(f)
    assert field_norm(apply_gamma1(p) - p) <= 1e-12 * field_norm(f)
    q = apply_gamma2(f)
    assert field_norm(apply_gamma2(q) - q) <= 1e-12 * field_norm(f)
    assert field_norm(p + q - f) <= 1e-13 * field_norm(f)


@given(shape=shapes, seed=st.integers(0, 2**32 - 1))
def test_self_adjoint_orthogonal_contractive(shape, seed):
    f, h = _random(shape, seed), _random(shape, seed + 1)
    scale = field_norm(f) * field_norm(h)
    assert abs(inner_product(apply_gamma1(f), h) - inner_product(f, apply_gamma1(h))) <= 1e-12 * scale
    assert abs(inner_product(apply_gamma2(f), h) - inner_product(f, apply_gamma2(h))) <= 1e-12 * scale
    assert abs(inner_product(apply_gamma1(f), apply_gamma2(h))) <= 1e-12 * scale
    assert field_norm(apply_gamma1(f)) <= field_norm(f) * (1 + 1e-14)


@given(shape=shapes, seed=st.integers(0, 2**32 - 1))
def test_reflection_is_isometric_involution(shape, seed):
    f = _random(shape, seed)
    r = apply_reflection(f)
    assert abs(field_norm(r) - field_norm(f)) <= 1e-12 * field_norm(f)
    assert field_norm(apply_reflection(r) - f) <= 1e-12 * field_norm(f)


def test_one_dimensional_projection_removes_only_the_mean():
    g = GridGeometry((6,))
    f = Field(g, np.arange(6.0)[None] + 0j)
    assert np.allclose(apply_gamma1(f).values, f.values - f.values.mean())
