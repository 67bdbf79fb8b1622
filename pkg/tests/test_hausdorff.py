"""Hausdorff distances between finite clouds."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sasaki_gh.exceptions import ConfigError
from sasaki_gh.hausdorff import (
    PointCloud,
    directed_hausdorff,
    hausdorff,
    hausdorff_brute,
    hyperbolic_cloud,
    nearest_distances,
)
from sasaki_gh.scenarios import F_function

clouds = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=st.floats(-5, 5))


@given(clouds, clouds)
def test_tree_matches_brute_force(A, B):
    assert hausdorff(A, B) == pytest.approx(hausdorff_brute(A, B), abs=1e-12)


@given(clouds, clouds, clouds)
def test_metric_properties(A, B, C):
    assert hausdorff(A, A) == 0.0
    assert hausdorff(A, B) == hausdorff(B, A)
    assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-12


def test_directed_distance_is_not_symmetric():
    A = np.array([[0.0, 0.0]])
    B = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert directed_hausdorff(A, B) == 0.0
    assert directed_hausdorff(B, A) == 5.0
    assert hausdorff(A, B) == 5.0


def test_validation():
    with pytest.raises(ConfigError):
        hausdorff(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        PointCloud(np.zeros((0, 2)))
    with pytest.raises(ConfigError):
        PointCloud(np.zeros((2, 2)), metric="spherical")
    with pytest.raises(ConfigError):
        hyperbolic_cloud(np.array([[1.0, 1.0, 1.0]]), 1.0)


def _hyp_circle(r, rt, count):
    t = 2 * np.pi * np.arange(count) / count
    return np.stack([np.full(count, np.sqrt(rt * rt + r * r)), r * np.cos(t), r * np.sin(t)], axis=1)


@pytest.mark.parametrize("rt", [0.3, 1.0, 4.0])
def test_parallel_hyperbolic_circles(rt):
    A = hyperbolic_cloud(_hyp_circle(1.0, rt, 256), rt)
    B = hyperbolic_cloud(_hyp_circle(2.0, rt, 256), rt)
    assert hausdorff(A, B) == pytest.approx(float(F_function(1.0, 2.0, rt)), abs=1e-9)
    assert hausdorff(A, B) == pytest.approx(hausdorff_brute(A, B), abs=1e-9)


def test_hyperbolic_nearest_distances_are_nearest():
    rt = 0.7
    A = hyperbolic_cloud(_hyp_circle(1.0, rt, 40), rt)
    B = hyperbolic_cloud(_hyp_circle(1.5, rt, 17), rt)
    d = nearest_distances(A, B)
    assert np.all(d >= F_function(1.0, 1.5, rt) - 1e-12)
    with pytest.raises(ConfigError):
        nearest_distances(A, PointCloud(A.points, "hyperbolic", 0.8))


@given(clouds, clouds, clouds)
def test_adding_points_never_increases_the_directed_distance(A, B, extra):
    assert directed_hausdorff(A, np.vstack([B, extra])) <= directed_hausdorff(A, B)


@pytest.mark.parametrize("dim", [2, 8, 16])
def test_tree_matches_brute_force_on_large_clouds(dim, rng):
    A = rng.normal(size=(2000, dim))
    B = rng.normal(size=(1500, dim)) * 1.1
    assert hausdorff(A, B) == pytest.approx(hausdorff_brute(A, B), abs=1e-12)


def test_concentric_circles():
    t = 2 * np.pi * np.arange(512) / 512
    A = np.stack([np.cos(t), np.sin(t)], axis=1)
    assert directed_hausdorff(A, 2 * A) == pytest.approx(1.0, abs=1e-12)
    assert hausdorff(A, 2 * A) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.2, 5.0), st.integers(0, 10 ** 6))
def test_hyperbolic_triangle_inequality(rt, seed):
    r = np.random.default_rng(seed)

    def cloud(k):
        x = r.normal(size=(k, 2))
        return hyperbolic_cloud(np.column_stack([np.sqrt(rt * rt + np.sum(x * x, 1)), x]), rt)

    A, B, C = cloud(7), cloud(5), cloud(9)
    assert hausdorff(A, B) == pytest.approx(hausdorff(B, A), abs=1e-12)
    assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-9
