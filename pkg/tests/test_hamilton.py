"""C^k norms, pullbacks and convergence reports."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sasaki_gh.alignment import DghConfig
from sasaki_gh.exceptions import ConfigError, NumericError
from sasaki_gh.geometry import circle_chart, covariant_derivative, flat_chart, sphere_chart
from sasaki_gh.hamilton import (
    ChartMap,
    ConvergenceReport,
    HamiltonRecord,
    TensorField02,
    ck_norm,
    equivalence_experiment,
    hamilton_converges,
    metric_field,
    pullback_metric,
)
from sasaki_gh.jets import SampleCounts

radius = st.floats(0.3, 3.0)


def constant_field(chart, value):
    return TensorField02(chart, lambda p: np.full((len(p), 1, 1), value))


def wavy_field(chart, a, b, c):
    # a smooth, non-parallel field on the sphere chart
    def ev(p):
        phi, th = p[:, 0], p[:, 1]
        S = np.empty((len(p), 2, 2))
        S[:, 0, 0] = a * np.cos(th) * np.sin(phi)
        S[:, 1, 1] = b * np.sin(phi) ** 2 * np.cos(2 * th)
        S[:, 0, 1] = S[:, 1, 0] = c * np.sin(phi) ** 2
        return S

    return TensorField02(chart, ev)


def test_zero_field_has_zero_norm():
    for chart in (circle_chart(1.2), sphere_chart(0.8)):
        zero = TensorField02(chart, lambda p: np.zeros((len(p), chart.dim, chart.dim)))
        for k in range(3):
            assert ck_norm(zero, chart, k, grid=32) == 0.0


@pytest.mark.parametrize("k", [0, 1, 2])
@given(r=radius, rho=radius)
def test_circle_closed_form(k, r, rho):
    g = circle_chart(r)
    sigma = constant_field(g, rho**2 - r**2)
    assert ck_norm(sigma, g, k) == pytest.approx(abs(rho**2 - r**2) / r**2, abs=1e-8)


def test_metric_has_norm_sqrt_two_on_the_sphere():
    S = sphere_chart(1.0)
    assert ck_norm(metric_field(S), S, 0) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_circle_covariant_derivatives_vanish():
    g = circle_chart(1.7, analytic=False)
    sigma = constant_field(g, 0.4)
    p = g.grid(64)
    d1 = covariant_derivative(sigma, g, p)
    assert np.max(np.abs(d1)) < 1e-6


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_norm_is_monotone_in_k_and_homogeneous(a, b, c, scale):
    S = sphere_chart(1.0)
    sigma = wavy_field(S, a, b, c)
    norms = [ck_norm(sigma, S, k, grid=12) for k in range(3)]
    assert norms[0] <= norms[1] <= norms[2]
    assert ck_norm(scale * sigma, S, 1, grid=12) == pytest.approx(abs(scale) * norms[1], rel=1e-10, abs=1e-10)


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_norm_triangle_inequality(c):
    S = sphere_chart(1.3)
    s1, s2 = wavy_field(S, *c[:3]), wavy_field(S, *c[3:])
    for k in (0, 1):
        assert ck_norm(s1 + s2, S, k, grid=12) <= ck_norm(s1, S, k, grid=12) + ck_norm(s2, S, k, grid=12) + 1e-9


def test_grid_validation():
    g = circle_chart(1.0)
    sigma = constant_field(g, 1.0)
    with pytest.raises(ConfigError, match="too coarse"):
        ck_norm(sigma, g, 1, grid=4)
    with pytest.raises(ConfigError, match="stencil"):
        ck_norm(sigma, g, 2, grid=512, step=0.01)
    with pytest.raises(ConfigError):
        ck_norm(sigma, g, -1)
    with pytest.raises(ConfigError):
        ck_norm(sigma, sphere_chart(1.0), 0)


def test_asymmetric_fields_are_rejected():
    g = flat_chart(2, ((0.0, 1.0), (0.0, 1.0)))
    bad = TensorField02(g, lambda p: np.broadcast_to(np.array([[0.0, 1.0], [0.0, 0.0]]), (len(p), 2, 2)))
    with pytest.raises(NumericError):
        bad(np.zeros((1, 2)))


def test_pullbacks():
    g = circle_chart(1.5)
    ident = pullback_metric(ChartMap.identity(1), g, g)
    assert np.allclose(ident(g.grid(8)), 2.25)
    to_rho = pullback_metric(ChartMap.identity(1), circle_chart(1.0), circle_chart(2.5))
    assert np.allclose(to_rho(np.zeros((3, 1))), 6.25)
    double = ChartMap(lambda p: 2 * p, lambda p: np.full((len(p), 1, 1), 2.0), "double")
    assert np.allclose(pullback_metric(double, circle_chart(1.0), g)(np.ones((2, 1))), 4 * 2.25)
    S = sphere_chart(1.0)
    rot = ChartMap(lambda p: p + [0.0, 1.0], lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2)))
    p = np.array([[0.7, 0.2]])
    assert np.allclose(pullback_metric(rot, S, S)(p), S.metric_at(p))
    flat = ChartMap(lambda p: 0 * p, lambda p: np.zeros((len(p), 1, 1)), "collapse")
    with pytest.raises(NumericError, match="singular"):
        pullback_metric(flat, g, g)(np.zeros((1, 1)))


def test_hamilton_convergence_of_round_circles():
    g = circle_chart(1.0)
    conv = hamilton_converges([(circle_chart(1 + 1 / i), None) for i in range(1, 9)], g, 1, tol=0.3)
    assert conv.column("ck") == pytest.approx([abs((1 + 1 / i) ** 2 - 1) for i in range(1, 9)], abs=1e-10)
    assert conv.verdict["ck_converges"]
    still = hamilton_converges([(circle_chart(2.0), None)] * 4, g, 1, tol=0.3)
    assert np.allclose(still.column("ck"), 3.0) and not still.verdict["ck_converges"]
    same = hamilton_converges([(g, None)] * 3, g, 2, tol=1e-12)
    assert np.all(same.column("ck") == 0.0)


def test_reports():
    empty = equivalence_experiment([], cfg=DghConfig(counts=SampleCounts(8, 1, 1, 4)))
    assert empty.records == [] and not empty.verdict["ck_converges"]
    rep = ConvergenceReport("x", [HamiltonRecord(2, 1.5, 0.5, 1.25, 0.0), HamiltonRecord(1, 2.0, 1.0, 3.0, 0.0)])
    assert [r.i for r in rep.records] == [1, 2]
    assert rep.verdict == {
        "ck_converges": True, "ck_decreasing": True, "dgh_converges": True, "dgh_decreasing": True, "agree": True,
    }
    with pytest.raises(NumericError):
        ConvergenceReport("bad", [HamiltonRecord(1, 1.0, -1.0, 0.0, 0.0)])


def test_small_equivalence_experiment():
    cfg = DghConfig(counts=SampleCounts(16, 2, 2, 6), restarts=2)
    rep = equivalence_experiment([2.0, 1.5, 4 / 3, 2.0], r=1.0, order=1, cfg=cfg, grid=64)
    assert rep.column("dgh") == pytest.approx([1.0, 0.5, 1 / 3, 1.0], abs=1e-9)
    assert rep.column("ck") == pytest.approx([3.0, 1.25, 7 / 9, 3.0], abs=1e-12)
    assert rep.records[0].runtime_ms == rep.records[3].runtime_ms
