import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfdglht import Grid, ValidationError, make_uniform_grid, quad_weights


def test_uniform_grid_three_points():
    g = make_uniform_grid(3, 0.0, 1.0)
    assert np.allclose(g.points, [0.0, 0.5, 1.0])


def test_uniform_grid_80_points_spacing():
    g = make_uniform_grid(80, 0.0, 1.0)
    assert g.m == 80
    assert np.allclose(np.diff(g.points), 1.0 / 79.0)


def test_uniform_grid_two_points():
    g = make_uniform_grid(2, 0.0, 2.0)
    assert np.allclose(g.points, [0.0, 2.0])


@pytest.mark.parametrize("m,a,b", [(1, 0, 1), (0, 0, 1), (3, 1, 1), (3, 2, 1)])
def test_uniform_grid_invalid_args(m, a, b):
    with pytest.raises(ValidationError):
        make_uniform_grid(m, a, b)


def test_grid_rejects_unsorted_points():
    with pytest.raises(ValidationError):
        Grid(np.array([0.0, 0.5, 0.5, 1.0]), 0.0, 1.0)


def test_grid_requires_spanning_endpoints():
    with pytest.raises(ValidationError):
        Grid(np.array([0.1, 0.5, 0.9]), 0.0, 1.0)


def test_trapezoid_weights_uniform_m3():
    w = quad_weights(make_uniform_grid(3, 0.0, 1.0))
    assert np.allclose(w.weights, [0.25, 0.5, 0.25])


def test_trapezoid_weights_uniform_m2():
    w = quad_weights(make_uniform_grid(2, 0.0, 1.0))
    assert np.allclose(w.weights, [0.5, 0.5])


def test_trapezoid_weights_nonuniform():
    g = Grid(np.array([0.0, 0.2, 1.0]), 0.0, 1.0)
    w = quad_weights(g)
    assert np.allclose(w.weights, [0.1, 0.5, 0.4])


@given(
    m=st.integers(min_value=2, max_value=60),
    a=st.floats(min_value=-10, max_value=10, allow_nan=False),
    width=st.floats(min_value=1e-3, max_value=50),
)
@settings(max_examples=60, deadline=None)
def test_constant_integrates_to_domain_length(m, a, width):
    w = quad_weights(make_uniform_grid(m, a, a + width))
    assert abs(w.weights.sum() - width) <= 1e-12 * max(1.0, width)


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_double_integral_factorizes_on_separable_integrands(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 30))
    interior = np.sort(rng.choice(np.linspace(0.01, 0.99, 200), size=m - 2, replace=False))
    g = Grid(np.concatenate([[0.0], interior, [1.0]]), 0.0, 1.0)
    w = quad_weights(g).weights
    f = rng.normal(size=m)
    h = rng.normal(size=m)
    tensor = float(np.einsum("t,s,t,s->", f, h, w, w))
    iterated = float((f * w).sum() * (h * w).sum())
    assert tensor == pytest.approx(iterated, rel=1e-10, abs=1e-12)
