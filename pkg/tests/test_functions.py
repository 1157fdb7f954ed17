import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpsantalo import functions as F
from lpsantalo.errors import DimensionError, DomainError, UnsupportedError

coords = st.floats(-5, 5, allow_nan=False)


def test_catalog_values():
    assert F.L1Norm(2)([1.0, -2.5]) == 3.5
    assert F.Quadratic(2)([1.0, 2.0]) == 2.5
    assert F.FunctionalSimplex(1)(-1.0) == -1.0
    assert F.FunctionalSimplex(1)(-1.01) == math.inf
    assert F.IndicatorCube(1, 2.0)(1.9) == 0.0
    assert F.IndicatorCube(1, 2.0)(2.1) == math.inf
    assert F.IndicatorBall(2)([0.6, 0.8]) == 0.0
    assert F.IndicatorBall(2)([0.6, 0.81]) == math.inf


def test_simplex_offsets():
    s = F.IndicatorSimplex(2)
    c = F.IndicatorSimplex(2, centered=True)
    assert s([0.2, 0.3]) == 0.0 and s([0.7, 0.4]) == math.inf
    assert c([0.0, 0.0]) == 0.0
    assert c([-1 / 3 - 1e-9, 0.0]) == math.inf


def test_batch_shape_is_preserved():
    out = F.L1Norm(2)(np.zeros((3, 4, 2)))
    assert out.shape == (3, 4)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        F.L1Norm(2)([1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        F.L1Norm(2)(1.0)


def test_invalid_parameters():
    with pytest.raises(DomainError):
        F.IndicatorCube(1, 0.0)
    with pytest.raises(DomainError):
        F.IndicatorBall(1, -1.0)
    with pytest.raises(DomainError):
        F.scale(0.0, F.L1Norm(1))


@given(x=coords, a=coords)
def test_translation_rule(x, a):
    f = F.L1Norm(1)
    assert F.translate(f, [a])(x) == pytest.approx(f(x + a), abs=1e-12)


@given(x=coords, lam=st.floats(0.1, 10))
def test_scaling_rule(x, lam):
    f = F.Quadratic(1)
    assert F.scale(lam, f)(x) == pytest.approx(lam * f(x / lam), rel=1e-12, abs=1e-12)


@given(x=coords, y=coords)
def test_tensor_rule(x, y):
    f = F.tensor(F.L1Norm(1), F.Quadratic(1))
    assert f.dim == 2
    assert f([x, y]) == pytest.approx(abs(x) + 0.5 * y * y)


@settings(max_examples=50)
@given(x=st.lists(coords, min_size=2, max_size=2), y=st.lists(coords, min_size=2, max_size=2),
       lam=st.floats(0, 1))
def test_convexity_of_catalog(x, y, lam):
    x, y = np.array(x), np.array(y)
    z = lam * x + (1 - lam) * y
    for f in (F.L1Norm(2), F.Quadratic(2), F.tensor(F.FunctionalSimplex(1), F.L1Norm(1))):
        fx, fy = f(x), f(y)
        if math.isfinite(fx) and math.isfinite(fy):
            assert f(z) <= lam * fx + (1 - lam) * fy + 1e-9


def test_extended_values_never_nan():
    X = np.array([[-2.0], [-1.0], [0.0], [np.inf]])
    vals = F.FunctionalSimplex(1).batch(X[:3])
    assert not np.isnan(vals).any()
    assert vals[0] == math.inf


def test_pullback_matches_composition():
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    f = F.pullback(F.L1Norm(2), A)
    x = np.array([0.3, -0.7])
    assert f(x) == pytest.approx(F.L1Norm(2)(A @ x))


def test_pullback_rejects_singular():
    with pytest.raises(DomainError):
        F.pullback(F.L1Norm(2), np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_gradients():
    assert np.allclose(F.Quadratic(2).gradient([1.0, -2.0]), [1.0, -2.0])
    assert np.allclose(F.L1Norm(2).gradient([1.0, -2.0]), [1.0, -1.0])
    with pytest.raises(UnsupportedError):
        F.IndicatorCube(1).gradient(0.0)


def test_grid_roundtrip(tmp_path):
    grid = F.GridSpec.cube(1, 4.0, 81)
    g = F.GridSampled.sample(F.L1Norm(1), grid)
    assert g(0.5) == pytest.approx(0.5, abs=1e-12)
    path = tmp_path / "grid.csv"
    F.write_grid_csv(g, path)
    back = F.read_grid_csv(path)
    xs = np.linspace(-3.9, 3.9, 17)[:, None]
    assert np.allclose(back.batch(xs), g.batch(xs))
    assert back(5.0) == math.inf


def test_grid_rejects_bad_input(tmp_path):
    with pytest.raises(DomainError):
        F.GridSpec((0.0,), (0.0,), (5,))
    bad = tmp_path / "bad.csv"
    bad.write_text("")
    with pytest.raises(DomainError):
        F.read_grid_csv(bad)


def test_inf_conv_of_quadratics():
    grid = F.GridSpec.cube(1, 4.0, 161)
    h = F.inf_conv(F.Quadratic(1), F.Quadratic(1), grid)
    # q □ q = q(x/2)·2 = x²/4
    xs = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(h.batch(xs), xs[:, 0] ** 2 / 4, atol=2e-3)


@pytest.mark.parametrize("f", [F.L1Norm(1), F.Quadratic(2), F.FunctionalSimplex(1),
                               F.translate(F.L1Norm(2), [0.5, -1.0])])
def test_affine_lower_bound(f):
    b = F.affine_lower_bound(f)
    rng = np.random.default_rng(0)
    X = rng.normal(scale=5.0, size=(500, f.dim))
    vals = f.batch(X)
    assert b.a > 0
    assert np.all(vals >= b.a * np.linalg.norm(X, axis=1) + b.b - 1e-9)


def test_affine_lower_bound_rejects_linear_growth_failure():
    grid = F.GridSpec.cube(1, 3.0, 31)
    flat = F.GridSampled(grid, np.zeros(31))
    # finite-domain grids are super-linear by the +inf outside; bounded sublevel sets pass
    assert F.affine_lower_bound(flat).a > 0
