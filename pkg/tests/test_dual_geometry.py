"""Dual numbers, charts, Christoffel symbols and the Lorentz model."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sasaki_gh.dual import Dual, jvp, nested_jet, primal
from sasaki_gh.exceptions import DomainError, NumericError
from sasaki_gh.geometry import (
    christoffel,
    circle_chart,
    compatibility_residual,
    covariant_derivative,
    fibonacci_sphere,
    flat_chart,
    hyperbolic_distance,
    lorentz_inner,
    metric_eval,
    sphere_chart,
    tensor_norm,
)

xs = st.floats(-2.0, 2.0, allow_nan=False)


@given(xs)
def test_jvp_of_elementary_functions(x):
    funcs = [
        (lambda c: [np.sin(c[0]) * np.exp(c[0])], lambda t: np.cos(t) * np.exp(t) + np.sin(t) * np.exp(t)),
        (lambda c: [np.sqrt(c[0] * c[0] + 1.0)], lambda t: t / np.sqrt(t * t + 1.0)),
        (lambda c: [1.0 / (2.0 + np.cos(c[0]))], lambda t: np.sin(t) / (2.0 + np.cos(t)) ** 2),
        (lambda c: [np.arcsinh(c[0]) - np.arctan(c[0])], lambda t: 1 / np.sqrt(1 + t * t) - 1 / (1 + t * t)),
        (lambda c: [c[0] ** 3], lambda t: 3 * t * t),
    ]
    for f, df in funcs:
        _, tan = jvp(f, [x], [1.0])
        assert tan[0] == pytest.approx(df(x), rel=1e-12, abs=1e-12)


def test_nested_jet_matches_second_derivative():
    # f(x) = x^3: d^2 f(x, u, X, U) = (x^3, 3x^2 u, 3x^2 X, 6x X u + 3x^2 U)
    x, u, X, U = 0.7, 0.3, -1.1, 0.4
    out = [float(primal(v)) for v in nested_jet(lambda c: [c[0] ** 3], [x, u, X, U], 2)]
    expected = [x**3, 3 * x * x * u, 3 * x * x * X, 6 * x * X * u + 3 * x * x * U]
    assert out == pytest.approx(expected, rel=1e-14)


def test_constant_outputs_get_zero_tangents():
    values, tangents = jvp(lambda c: [c[0] * 2.0, 5.0], [np.arange(3.0)], [np.ones(3)])
    assert np.all(tangents[1] == 0) and np.shape(tangents[1]) == (3,)
    assert np.allclose(tangents[0], 2.0)


def test_dual_division_and_power():
    d = Dual(2.0, 1.0)
    assert (1.0 / d).du == pytest.approx(-0.25)
    assert (d ** 0.5).du == pytest.approx(0.5 / np.sqrt(2.0))
    assert (3.0 - d).du == -1.0


def test_fd_christoffel_matches_analytic_sphere():
    p = np.array([[0.4, 1.0], [1.2, 5.0], [2.5, 3.3]])
    exact = christoffel(sphere_chart(1.7), p)
    approx = christoffel(sphere_chart(1.7, analytic=False), p)
    assert np.max(np.abs(exact - approx)) < 1e-7


def test_levi_civita_is_metric_compatible():
    p = fibonacci_sphere(50)
    assert compatibility_residual(sphere_chart(1.3, analytic=False), p) < 1e-6
    assert compatibility_residual(sphere_chart(1.3), p) < 1e-6


def test_circle_and_flat_connections_vanish():
    assert np.all(christoffel(circle_chart(2.0, analytic=False), [[0.3], [6.0]]) == 0)
    assert np.all(christoffel(flat_chart(3), np.zeros((2, 3))) == 0)


def test_periodic_axes_wrap_and_bounded_axes_reject():
    g = metric_eval(circle_chart(2.0), [[100.0]])
    assert g[0, 0, 0] == pytest.approx(4.0)
    with pytest.raises(DomainError):
        metric_eval(sphere_chart(1.0), [[4.0, 0.0]])
    with pytest.raises(DomainError):
        christoffel(sphere_chart(1.0, analytic=False), [[1e-5, 0.0]])


def test_singular_metric_is_reported():
    chart = circle_chart(1.0, analytic=False)
    bad = type(chart)(1, ((0.0, 1.0),), (True,), lambda p: np.zeros((len(p), 1, 1)))
    with pytest.raises(NumericError):
        christoffel(bad, [[0.5]])


def test_metric_is_parallel_and_has_frobenius_norm_sqrt_n():
    chart = sphere_chart(0.8)
    p = fibonacci_sphere(40)
    dg = covariant_derivative(lambda q: metric_eval(chart, q), chart, p)
    assert np.max(np.abs(dg)) < 1e-7
    assert np.allclose(tensor_norm(metric_eval(chart, p), metric_eval(chart, p), 2), np.sqrt(2.0))


def _hyp_point(rt, x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([[np.sqrt(rt * rt + x @ x)], x])


@given(st.floats(0.1, 10.0), st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_hyperbolic_distance_is_a_metric(rt, c):
    p, q, s = (_hyp_point(rt, c[i:i + 2]) for i in (0, 2, 4))
    dpq = hyperbolic_distance(p, q, rt)
    assert dpq >= 0
    assert hyperbolic_distance(p, p, rt) == pytest.approx(0.0, abs=1e-5 * rt)
    assert dpq == pytest.approx(hyperbolic_distance(q, p, rt), rel=1e-12, abs=1e-12)
    assert dpq <= hyperbolic_distance(p, s, rt) + hyperbolic_distance(s, q, rt) + 1e-6 * rt


def test_hyperbolic_distance_along_a_geodesic():
    rt, t = 0.5, 1.3
    p = np.array([rt, 0.0, 0.0])
    q = np.array([rt * np.cosh(t), rt * np.sinh(t), 0.0])
    assert hyperbolic_distance(p, q, rt) == pytest.approx(rt * t, rel=1e-12)


def test_lorentz_model_validation():
    with pytest.raises(ValueError):
        lorentz_inner(np.zeros(3), np.zeros(4))
    with pytest.raises(NumericError):
        hyperbolic_distance(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), 1.0)
