import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpsantalo import functions as F, transform
from lpsantalo.errors import DimensionError, DivergenceError, DomainError, UnsupportedError


class LogCosh(F.FunctionHandle):
    """``log cosh x``: convex, integrable, no known dual domain."""

    dim = 1
    kind = "logcosh"

    def _eval(self, X):
        return np.logaddexp(X[:, 0], -X[:, 0]) - math.log(2.0)


@pytest.mark.parametrize("f", [F.IndicatorCube(2, 0.7), F.IndicatorBall(2), F.IndicatorSimplex(2, centered=True),
                               F.translate(F.L1Norm(1), [0.4]), F.pullback(F.L1Norm(2), np.diag([2.0, 0.5])),
                               F.tensor(F.L1Norm(1), F.FunctionalSimplex(1))],
                         ids=lambda f: f.kind)
@pytest.mark.parametrize("p", [0.5, 2.0])
def test_closed_vs_quadrature(f, p):
    rng = np.random.default_rng(7)
    Y = rng.uniform(-0.8, 0.8, size=(6, f.dim))
    quad = transform.lp_transform(f, p, path="quadrature").batch(Y)
    exact = transform.lp_transform(f, p, path="closed").batch(Y)
    assert np.allclose(quad, exact, rtol=1e-7, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(y=st.floats(-1.4, 1.4), a=st.floats(-2, 2))
def test_translation_rule(y, a):
    f = F.L1Norm(1)
    Ta = transform.lp_transform(F.translate(f, [a]), 1.0, path="quadrature")
    T = transform.lp_transform(f, 1.0)
    assert Ta(y) == pytest.approx(T(y) - a * y, abs=1e-9)


def test_tensor_rule():
    f, g = F.L1Norm(1), F.FunctionalSimplex(1)
    T = transform.lp_transform(F.tensor(f, g), 1.5, path="quadrature")
    y = np.array([0.3, -0.8])
    expected = f.transform_closed(y[:1], 1.5) + g.transform_closed(y[1:], 1.5)
    assert T(y) == pytest.approx(float(expected), rel=1e-9)


def test_outside_domain_is_inf():
    T = transform.lp_transform(F.L1Norm(1), 1.0, path="quadrature")
    assert T(2.5) == math.inf
    assert T(-2.5) == math.inf


@pytest.mark.parametrize("p", [0.0, -1.0])
def test_bad_exponent(p):
    with pytest.raises(DomainError):
        transform.lp_transform(F.L1Norm(1), p)


def test_unknown_path():
    with pytest.raises(DomainError):
        transform.lp_transform(F.L1Norm(1), 1.0, path="magic")
    with pytest.raises(UnsupportedError):
        transform.lp_transform(LogCosh(), 1.0, path="closed")


def test_domain_discovery():
    lo, hi = transform.discover_domain_1d(LogCosh(), 1.0)
    assert lo[0] == pytest.approx(-2.0, abs=1e-9)
    assert hi[0] == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(DimensionError):
        transform.discover_domain_1d(F.L1Norm(2), 1.0)


def test_classical_limit():
    T = transform.lp_transform(F.FunctionalSimplex(1), math.inf)
    ys = np.array([[-2.0], [0.0], [0.5]])
    assert np.allclose(T.batch(ys), 1.0 - ys[:, 0], atol=1e-6)
    assert T(1.5) == math.inf
    L = transform.lp_transform(F.L1Norm(1), math.inf)
    assert L(0.5) == pytest.approx(0.0, abs=1e-9)
    assert L(2.0) == math.inf


def test_large_p_approaches_classical():
    y = np.array([[0.3]])
    gaps = [abs(float(F.FunctionalSimplex(1).transform_closed(y, p)[0]) - 0.7) for p in (10.0, 100.0, 1000.0)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_gradient_and_hessian():
    p, y = 1.5, 0.4
    g = transform.transform_gradient(F.FunctionalSimplex(1), p, [y])
    assert g[0] == pytest.approx(-1.0 + 1.0 / (p + 1 - p * y), rel=1e-9)
    H = transform.transform_hessian(F.Quadratic(2), p, [0.3, -0.2])
    assert np.allclose(H, p / (p + 1) * np.eye(2), atol=1e-9)


def test_fischer_information_of_gaussian():
    # the tilted measure has variance 1/(p+1); the score is p y - (p+1) x
    for p in (0.5, 1.0, 3.0):
        assert transform.fischer_info(F.Quadratic(1), p, [0.7]) == pytest.approx(p + 1.0, rel=1e-9)


def test_fischer_information_rejects_walls():
    with pytest.raises(UnsupportedError):
        transform.fischer_info(F.FunctionalSimplex(1), 1.0, [0.0])
    with pytest.raises(UnsupportedError):
        transform.fischer_info(F.IndicatorCube(1), 1.0, [0.0])


def test_tilted_measure_checks():
    with pytest.raises(DimensionError):
        transform.tilted_measure(F.L1Norm(2), 1.0, [0.1])
    with pytest.raises(DivergenceError):
        transform.tilted_measure(F.L1Norm(1), 1.0, [3.0])
    m = transform.tilted_moments(F.Quadratic(1), 1.0, [1.0])
    assert m.barycenter[0] == pytest.approx(0.5)
    assert m.covariance[0, 0] == pytest.approx(0.5)


def test_simplex_support_matches_body_quadrature():
    S = F.IndicatorSimplex(2)
    for y in ([0.3, -1.1], [2.0, 2.0], [0.0, 0.0]):
        q = transform.lp_support(S, 1.3, y)
        assert transform.simplex_support(y, 1.3) == pytest.approx(q, abs=1e-9)
    with pytest.raises(DomainError):
        transform.lp_support(F.L1Norm(1), 1.0, 0.0)


def test_finite_domain_radius_is_inside():
    r = transform.finite_domain_radius(F.L1Norm(1), 1.0)
    assert 0 < r < 2.0


def test_grid_legendre():
    vals = transform.legendre(F.Quadratic(1), np.array([[0.0], [1.0], [-2.0]]))
    # a grid search approximates from below
    assert np.all(vals <= [0.0, 0.5, 2.0]) and np.allclose(vals, [0.0, 0.5, 2.0], atol=1e-4)
