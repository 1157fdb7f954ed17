import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from lpsantalo import functions as F, mahler, santalo, transform
from lpsantalo.errors import ConvergenceError, DomainError


@pytest.mark.parametrize("f", [F.Quadratic(1), F.L1Norm(1), F.IndicatorCube(1), F.IndicatorBall(2)],
                         ids=lambda f: f"{f.kind}{f.dim}")
def test_even_functions_are_centred(f):
    r = santalo.santalo_point(f, 1.0)
    assert r.converged
    assert np.max(np.abs(r.point)) < 1e-9


@settings(max_examples=8, deadline=None)
@given(a=st.floats(-1.5, 1.5))
def test_translation_equivariance(a):
    f = F.FunctionalSimplex(1)
    s0 = santalo.santalo_point(f, 1.0).point[0]
    s1 = santalo.santalo_point(F.translate(f, [a]), 1.0).point[0]
    assert s1 == pytest.approx(s0 - a, abs=2e-8)


def test_linear_equivariance():
    A = np.array([[1.5, 0.4], [-0.3, 0.8]])
    f = F.translate(F.FunctionalSimplex(2), [0.3, 0.1])
    s = santalo.santalo_point(f, 2.0).point
    sa = santalo.santalo_point(F.pullback(f, A), 2.0).point
    assert np.allclose(A @ sa, s, atol=1e-8)


def test_functional_simplex_point_matches_direct_minimisation():
    f = F.FunctionalSimplex(1)
    T = transform.lp_transform(f, 1.0)
    res = optimize.minimize_scalar(lambda x: santalo.mahler_translated(f, 1.0, [x], transform_handle=T),
                                   bracket=(-0.5, 0.1, 1.0), method="brent", tol=1e-10)
    r = santalo.santalo_point(f, 1.0, transform_handle=T)
    assert r.point[0] == pytest.approx(res.x, abs=1e-6)
    assert r.mahler_at_point == pytest.approx(res.fun, rel=1e-12)


def test_residual_is_the_dual_barycenter():
    r = santalo.santalo_point(F.FunctionalSimplex(1), 2.0)
    assert r.residual < 1e-9
    assert r.trace[-1][1] == pytest.approx(r.mahler_at_point)


def test_upper_bound_by_quadratic_value():
    for f in (F.FunctionalSimplex(1), F.IndicatorSimplex(1), F.translate(F.L1Norm(1), [0.8])):
        assert santalo.mahler_inf(f, 1.0) <= 4 * math.pi * (1 + 1e-9)


def test_minimum_is_below_value_at_origin():
    f = F.translate(F.FunctionalSimplex(1), [0.4])
    assert santalo.mahler_inf(f, 1.0) <= mahler.mahler(f, 1.0).value


def test_translated_mahler_is_infinite_outside_domain():
    # M_p(T_x f) diverges once x leaves the interior of the domain of f
    assert santalo.mahler_translated(F.FunctionalSimplex(1), 1.0, [-1.5]) == math.inf


def test_start_outside_domain_raises():
    with pytest.raises(DomainError):
        santalo.santalo_point(F.FunctionalSimplex(1), 1.0, x0=[-2.0])


def test_iteration_cap_raises():
    with pytest.raises(ConvergenceError):
        santalo.santalo_point(F.FunctionalSimplex(1), 1.0, x0=[1.5], max_iter=1)


def test_result_serialises():
    d = santalo.santalo_point(F.L1Norm(1), 1.0).to_dict()
    assert set(d) == {"point", "mahler_at_point", "residual", "iterations", "converged", "trace"}
    assert isinstance(d["point"], list)
