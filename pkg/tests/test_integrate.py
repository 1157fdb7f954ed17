import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci_integrate

from lpsantalo import functions as F, integrate
from lpsantalo.errors import DimensionError, DivergenceError, DomainError
from lpsantalo.integrate import QuadratureSpec

CLOSED = [F.L1Norm(1), F.Quadratic(1), F.FunctionalSimplex(1), F.L1Norm(2), F.Quadratic(3),
          F.tensor(F.FunctionalSimplex(1), F.Quadratic(1))]


@pytest.mark.parametrize("f", CLOSED, ids=lambda f: f"{f.kind}{f.dim}")
def test_volume_matches_closed_form(f):
    v = integrate.volume(f)
    # the adaptive rule stops at a node budget in three dimensions
    assert v == pytest.approx(f.volume_closed(), rel=1e-10 if f.dim < 3 else 1e-8)


@pytest.mark.parametrize("body", [F.IndicatorCube(2, 0.5), F.IndicatorBall(3), F.IndicatorSimplex(3)],
                         ids=lambda f: f.kind)
def test_body_volumes_by_every_method(body):
    exact = body.volume_closed()
    assert integrate.volume(body) == pytest.approx(exact, rel=1e-12)
    assert integrate.volume(body, method="body") == pytest.approx(exact, rel=1e-9)


def test_unknown_volume_method():
    with pytest.raises(DomainError):
        integrate.volume(F.L1Norm(1), method="bogus")


def test_barycenter_and_covariance():
    m = integrate.covariance(F.FunctionalSimplex(1))
    # e^{-x} on [-1, inf): barycenter 0, variance 1
    assert m.volume == pytest.approx(math.e)
    assert m.barycenter[0] == pytest.approx(0.0, abs=1e-12)
    assert m.covariance[0, 0] == pytest.approx(1.0, rel=1e-10)
    b = integrate.barycenter(F.translate(F.Quadratic(2), [1.0, -2.0]))
    assert np.allclose(b, [-1.0, 2.0], atol=1e-10)


def test_ball_second_moment():
    m = integrate.covariance(F.IndicatorBall(2))
    assert np.allclose(m.covariance, np.eye(2) / 4, atol=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 3.5])
def test_moment_of_laplace(t):
    # ∫ |x|^t e^{-|x|} dx = 2 Γ(t+1)
    assert integrate.moment(F.L1Norm(1), t) == pytest.approx(2 * math.gamma(t + 1), rel=1e-10)


def test_moment_rejects_bad_order():
    with pytest.raises(DomainError):
        integrate.moment(F.L1Norm(1), 0.0)


@settings(max_examples=20, deadline=None)
@given(y=st.floats(-1.9, 1.9), p=st.sampled_from([0.5, 1.0, 2.0]))
def test_tilted_integral_against_scipy(y, p):
    # ∫ e^{p x y − (p+1)|x|} dx
    res = integrate.log_tilted(F.L1Norm(1), [[y]], p, p + 1.0)
    c = p + 1.0
    a = p * y
    if abs(a) >= c:
        assert res.diverged[0]
        return
    exact = math.log(2 * c / (c * c - a * a))
    assert float(res.logz[0]) == pytest.approx(exact, rel=1e-10, abs=1e-12)


def test_divergence_is_detected():
    res = integrate.log_tilted(F.L1Norm(1), [[2.0]], 1.0, 1.0)
    assert res.diverged[0] and res.logz[0] == math.inf


def test_tilt_dimension_checked():
    with pytest.raises(DimensionError):
        integrate.log_tilted(F.L1Norm(2), [[1.0]], 1.0)


def test_weighted_integral_signed():
    val = integrate.weighted_integral(lambda X: X[:, 0] ** 3 - 1.0, F.Quadratic(1))
    assert val == pytest.approx(-math.sqrt(2 * math.pi), rel=1e-10)


def test_weighted_integral_scalar_callable():
    val = integrate.weighted_integral(lambda x: math.cos(x), F.Quadratic(1))
    exact, _ = sci_integrate.quad(lambda x: math.cos(x) * math.exp(-x * x / 2), -np.inf, np.inf)
    assert val == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("scheme", ["tensor-gauss-legendre", "gauss-hermite", "adaptive"])
def test_schemes_from_config(scheme):
    spec = QuadratureSpec.from_config({"quad.scheme": scheme, "quad.rtol": 1e-8})
    assert integrate.volume(F.Quadratic(1), spec) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-6)


def test_qmc_scheme_is_reproducible():
    spec = QuadratureSpec.from_config({"quad.scheme": "qmc", "quad.nodes": 4096, "quad.seed": 3})
    a = integrate.volume(F.Quadratic(4), spec)
    b = integrate.volume(F.Quadratic(4), spec)
    assert a == b
    assert a == pytest.approx((2 * math.pi) ** 2, rel=5e-2)


def test_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(target_rel_tol=0.5)
    with pytest.raises(DomainError):
        QuadratureSpec(truncation_radius=-1.0)
    with pytest.raises(DomainError):
        QuadratureSpec.from_config({"quad.scheme": "simpson"})


def test_grid_sampled_volume():
    grid = F.GridSpec.cube(1, 30.0, 6001)
    g = F.GridSampled.sample(F.L1Norm(1), grid)
    assert integrate.volume(g) == pytest.approx(2.0, rel=1e-5)
