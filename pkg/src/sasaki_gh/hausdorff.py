"""Hausdorff distances between finite point clouds.

Euclidean clouds use a k-d tree for nearest-neighbour queries; clouds on the
hyperboloid are compared by brute force in chunks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .exceptions import ConfigError
from .geometry import hyperbolic_distance, lorentz_inner

_CHUNK = 2048


@dataclass
class PointCloud:
    """A finite set of points with a metric tag.

    ``metric`` is ``"euclidean"`` or ``"hyperbolic"``; hyperbolic clouds carry
    the curvature radius ``rt`` and live in the Lorentz model.
    """

    points: np.ndarray
    metric: str = "euclidean"
    rt: float = None

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float, ndmin=2)
        if self.points.size == 0 or len(self.points) == 0:
            raise ConfigError("point cloud is empty")
        if self.metric not in ("euclidean", "hyperbolic"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.metric == "hyperbolic" and (self.rt is None or self.rt <= 0):
            raise ConfigError("hyperbolic clouds need a positive rt")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def tree(self) -> cKDTree:
        if not hasattr(self, "_tree"):
            self._tree = cKDTree(self.points)
        return self._tree


def _as_cloud(x) -> PointCloud:
    return x if isinstance(x, PointCloud) else PointCloud(x)


def _check_pair(A: PointCloud, B: PointCloud) -> None:
    if A.dim != B.dim:
        raise ConfigError(f"dimension mismatch: {A.dim} vs {B.dim}")
    if A.metric != B.metric or (A.metric == "hyperbolic" and not np.isclose(A.rt, B.rt)):
        raise ConfigError("metric mismatch between clouds")


def nearest_distances(A, B, workers: int = 1) -> np.ndarray:
    """Distance from every point of ``A`` to its nearest neighbour in ``B``."""
    A, B = _as_cloud(A), _as_cloud(B)
    _check_pair(A, B)
    if A.metric == "euclidean":
        d, _ = B.tree().query(A.points, k=1, workers=workers)
        return d
    out = np.empty(len(A))
    for i in range(0, len(A), _CHUNK):
        a = A.points[i:i + _CHUNK]
        inner = -(a[:, 1:] @ B.points[:, 1:].T - np.outer(a[:, 0], B.points[:, 0]))
        arg = np.min(inner, axis=1) / (A.rt * A.rt)
        out[i:i + _CHUNK] = A.rt * np.arccosh(np.maximum(arg, 1.0))
    return out


def directed_hausdorff(A, B, workers: int = 1) -> float:
    """``max_a min_b dist(a, b)``."""
    return float(np.max(nearest_distances(A, B, workers)))


def hausdorff(A, B, workers: int = 1) -> float:
    """Symmetric Hausdorff distance: the larger of the two directed values."""
    return max(directed_hausdorff(A, B, workers), directed_hausdorff(B, A, workers))


def hausdorff_brute(A, B) -> float:
    """O(|A| |B|) reference implementation without spatial indexing."""
    A, B = _as_cloud(A), _as_cloud(B)
    _check_pair(A, B)

    def directed(X, Y):
        best = 0.0
        for i in range(0, len(X), _CHUNK):
            x = X.points[i:i + _CHUNK]
            if X.metric == "euclidean":
                D = cdist(x, Y.points)
            else:
                D = hyperbolic_distance(x[:, None, :], Y.points[None, :, :], X.rt, validate=False)
            best = max(best, float(np.max(np.min(D, axis=1))))
        return best

    return max(directed(A, B), directed(B, A))


def hyperbolic_cloud(points, rt: float) -> PointCloud:
    """Wrap Lorentz-model points after checking they lie on the hyperboloid."""
    points = np.asarray(points, dtype=float)
    resid = np.abs(lorentz_inner(points, points) + rt * rt) / (rt * rt)
    if np.any(resid > 1e-8):
        raise ConfigError("points are not on the hyperboloid")
    return PointCloud(points, "hyperbolic", rt)
