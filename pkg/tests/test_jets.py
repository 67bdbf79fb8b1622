"""Sasaki metrics, unit-bundle sampling and jet lifts."""
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sasaki_gh.exceptions import ConfigError
from sasaki_gh.geometry import christoffel, circle_chart, flat_chart, metric_eval, sphere_chart
from sasaki_gh.jets import (
    JetLift,
    LiftedCloud,
    SampleCounts,
    SasakiLevel,
    block_labels,
    column_names,
    jet_from_derivatives,
    lift_cloud,
    nested_differential,
    sasaki_eval,
    sasaki_matrix,
    top_norms,
    unit_bundle_sample,
    unit_directions,
)
from sasaki_gh.scenarios import round_family


def test_block_layout():
    assert block_labels(2) == ["00", "10", "01", "11"]
    assert column_names(1, 2) == ["b0_x0", "b0_x1", "b1_x0", "b1_x1"]


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_flat_sasaki_metric_is_identity(level, rng):
    chart = flat_chart(2)
    lvl = SasakiLevel(level, chart)
    p = rng.normal(size=(5, lvl.chart.dim))
    assert np.max(np.abs(lvl.metric_at(p) - np.eye(lvl.chart.dim))) < 1e-10


def test_sasaki_matrix_splits_horizontal_and_vertical(rng):
    chart = sphere_chart(1.4)
    x = np.array([[0.9, 2.0]])
    u = rng.normal(size=(1, 2))
    g, gam = metric_eval(chart, x), christoffel(chart, x)
    G = sasaki_matrix(g, gam, u)
    xi, eta = rng.normal(size=2), rng.normal(size=2)
    vert = eta + np.einsum("kij,i,j->k", gam[0], xi, u[0])
    expected = xi @ g[0] @ xi + vert @ g[0] @ vert
    v = np.concatenate([xi, eta])
    assert v @ G[0] @ v == pytest.approx(expected, rel=1e-12)
    assert np.allclose(G, np.swapaxes(G, 1, 2))


def test_sasaki_eval_checks_order():
    lvl = SasakiLevel(1, circle_chart(1.0))
    assert sasaki_eval(lvl, [[0.1, 0.2]], [[1.0, 0.0]], [[1.0, 0.0]])[0] == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        sasaki_eval(lvl, [[0.1]], [[1.0]], [[1.0]])


@pytest.mark.parametrize("chart", [circle_chart(1.5), sphere_chart(0.7)], ids=["circle", "sphere"])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_unit_bundle_norms(chart, order):
    counts = SampleCounts(base=16, radii=2, fiber_dirs=3, top_dirs=5)
    sample = unit_bundle_sample(chart, order, counts, fiber_cap=0.8)
    assert np.max(np.abs(top_norms(sample) - 1.0)) < 1e-9


def test_intermediate_fibers_respect_the_cap():
    chart = circle_chart(2.0)
    sample = unit_bundle_sample(chart, 2, SampleCounts(8, 3, 2, 4), fiber_cap=0.6)
    u = sample.points[:, 1]
    norms = np.abs(u) * 2.0
    assert norms.max() == pytest.approx(0.6) and norms.min() == 0.0
    assert len(sample) == 8 * (1 + 3 * 2) * 4


def test_unit_directions_shapes(rng):
    for d, k in [(1, 7), (2, 5), (3, 9), (5, 11)]:
        w = unit_directions(d, k, rng)
        assert np.allclose(np.linalg.norm(w, axis=1), 1.0)
        assert w.shape == ((2, 1) if d == 1 else (k, d))


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("order", [0, 1, 2])
def test_nested_differential_matches_closed_form(n, order, rng):
    emb = round_family(n, 1.3).embedding
    counts = SampleCounts(base=7, radii=2, fiber_dirs=3, top_dirs=3)
    p = unit_bundle_sample(emb.chart, order, counts).points
    got = nested_differential(emb, order, p)
    want = jet_from_derivatives(emb.derivs(p[:, :n]), p, order)
    assert np.max(np.abs(got - want)) < 1e-8


def test_round_embeddings_are_isometric():
    for n in (1, 2):
        emb = round_family(n, 0.9).embedding
        p = emb.chart.grid(20)
        assert emb.isometry_residual(p) < 1e-12


def test_lifted_cloud_padding_and_csv(tmp_path):
    emb = round_family(1, 1.0).embedding
    cloud = lift_cloud(emb, unit_bundle_sample(emb.chart, 1, SampleCounts(4, 1, 1, 2)))
    wide = cloud.padded(3)
    assert wide.blocks.shape == (8, 2, 3)
    assert np.all(wide.blocks[:, :, 2] == 0)
    assert np.array_equal(wide.blocks[:, :, :2], cloud.blocks)
    with pytest.raises(ConfigError):
        wide.padded(2)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path, comment="circle r=1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# circle r=1" and lines[1] == "b0_x0,b0_x1,b1_x0,b1_x1"
    back = np.loadtxt(path, delimiter=",", comments="#", skiprows=2)
    assert np.array_equal(back, cloud.points)


def test_jet_lift_transformer():
    emb = round_family(1, 2.0).embedding
    X = unit_bundle_sample(emb.chart, 1, SampleCounts(6, 1, 1, 2)).points
    est = JetLift(embedding=emb, order=1)
    assert clone(est).get_params()["order"] == 1
    with pytest.raises(NotFittedError):
        est.transform(X)
    out = est.fit_transform(X)
    assert out.shape == (12, 4)
    assert list(est.get_feature_names_out()) == column_names(1, 2)
    with pytest.raises(ConfigError):
        JetLift(embedding=emb, order=2).fit(X)


def test_lifted_unit_vectors_have_unit_length():
    # d f maps unit tangent vectors of an isometric embedding to unit vectors
    emb = round_family(2, 1.7).embedding
    cloud = lift_cloud(emb, unit_bundle_sample(emb.chart, 1, SampleCounts(30, 1, 1, 6)))
    assert np.allclose(np.linalg.norm(cloud.blocks[:, 1], axis=1), 1.0, atol=1e-12)


def test_fd_charts_keep_unit_norms_to_fd_accuracy():
    sample = unit_bundle_sample(sphere_chart(1.2, analytic=False), 2, SampleCounts(12, 2, 3, 4))
    assert np.max(np.abs(top_norms(sample) - 1.0)) < 1e-5


def test_order_one_circle_lift():
    r = 1.7
    emb = round_family(1, r).embedding
    sample = unit_bundle_sample(emb.chart, 1, SampleCounts(9, 1, 1, 2))
    cloud = lift_cloud(emb, sample)
    theta = sample.points[:, 0]
    assert np.allclose(sample.points[:, 1] ** 2, 1 / r**2)
    assert np.allclose(cloud.blocks[:, 0], r * np.stack([np.cos(theta), np.sin(theta)], 1))
    sign = np.sign(sample.points[:, 1])[:, None]
    assert np.allclose(cloud.blocks[:, 1], sign * np.stack([-np.sin(theta), np.cos(theta)], 1))
    assert len(cloud) == len(sample)
