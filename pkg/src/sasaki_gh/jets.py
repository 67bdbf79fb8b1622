"""Iterated tangent bundles, Sasaki metrics and jet lifts of embeddings.

Coordinates on ``T^l M`` are flat vectors of length ``2**l * n``.  The first
half is the foot point in ``T^{l-1} M`` and the second half the fiber vector,
applied recursively.  Block ``i`` (``n`` coordinates) is named by the binary
string whose ``j``-th character is bit ``j`` of ``i``: character ``j`` records
whether the block sits in the base (``0``) or fiber (``1``) copy at level
``j + 1``.  Block ``"00...0"`` is the base point.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import dual
from .exceptions import ConfigError, NumericError
from .geometry import DEFAULT_FD_STEP, MetricChart, christoffel, fibonacci_sphere, metric_eval

TOL_UNIT = 1e-9


def block_labels(order: int) -> list[str]:
    return ["".join(str((i >> j) & 1) for j in range(order)) for i in range(2 ** order)]


def column_names(order: int, m: int) -> list[str]:
    return [f"b{s}_x{c}" for s in block_labels(order) for c in range(m)]


# Sasaki metric ------------------------------------------------------------

def sasaki_matrix(g: np.ndarray, gamma: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sasaki metric of ``g`` at ``(x, u)`` in coordinates ``(dx, du)``.

    A tangent vector ``(xi, eta)`` has horizontal part ``xi`` and vertical part
    ``eta + Gamma(xi, u)``; the metric is ``g`` on each part.
    """
    K = np.einsum("nkij,nj->nki", gamma, u)
    gK = g @ K
    top = np.concatenate([g + np.swapaxes(K, 1, 2) @ gK, np.swapaxes(gK, 1, 2)], axis=2)
    bottom = np.concatenate([gK, g], axis=2)
    G = np.concatenate([top, bottom], axis=1)
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def sasaki_chart(base: MetricChart, step: float = DEFAULT_FD_STEP) -> MetricChart:
    """The chart of ``T(base)`` carrying the Sasaki metric of ``base``.

    Its own connection (needed one level up) comes from finite differences.
    """
    n = base.dim

    def metric(P):
        P = np.asarray(P, dtype=float)
        x, u = P[:, :n], P[:, n:]
        return sasaki_matrix(metric_eval(base, x), christoffel(base, x, step), u)

    return MetricChart(
        dim=2 * n,
        bounds=tuple(base.bounds) + ((-np.inf, np.inf),) * n,
        periodic=tuple(base.periodic) + (False,) * n,
        metric_fn=metric,
        label=f"T({base.label})",
    )


@dataclass(frozen=True)
class SasakiLevel:
    """``(T^l M, g_S^l)``; level 0 is the base chart itself."""

    level: int
    base: MetricChart
    step: float = DEFAULT_FD_STEP

    @property
    def chart(self) -> MetricChart:
        return _iterated_chart(self.base, self.level, self.step)

    def metric_at(self, v1) -> np.ndarray:
        return metric_eval(self.chart, v1)


@lru_cache(maxsize=64)
def _iterated_chart(base: MetricChart, level: int, step: float) -> MetricChart:
    chart = base
    for _ in range(level):
        chart = sasaki_chart(chart, step)
    return chart


def sasaki_eval(level: SasakiLevel, v1, v2, v3) -> np.ndarray:
    """``(g_S^l)_{v1}(v2, v3)`` for batches of jet points and tangent vectors."""
    v1 = np.array(v1, dtype=float, ndmin=2)
    v2 = np.array(v2, dtype=float, ndmin=2)
    v3 = np.array(v3, dtype=float, ndmin=2)
    d = level.chart.dim
    if v1.shape[1] != d or v2.shape[1] != d or v3.shape[1] != d:
        raise ConfigError(f"order mismatch: level {level.level} expects {d} coordinates")
    G = level.metric_at(v1)
    return np.einsum("ni,nij,nj->n", v2, G, v3)


# embeddings ---------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingMap:
    """An embedding of a chart into ``E^m`` (or the Lorentz space ``R^m_1``).

    ``func`` maps a list of ``n`` coordinate arrays to a list of ``m`` output
    arrays and must be written with operations that accept
    :class:`~sasaki_gh.dual.Dual` inputs.  ``derivs`` optionally returns the
    analytic derivative tensors ``[f, Df, D2f, ...]`` at a batch of points,
    used to cross-check the forward-mode path.
    """

    chart: MetricChart
    target_dim: int
    func: Callable
    ambient: str = "euclidean"
    derivs: Optional[Callable] = None
    max_order: int = 3
    label: str = ""

    def ambient_metric(self) -> np.ndarray:
        G = np.eye(self.target_dim)
        if self.ambient == "lorentz":
            G[0, 0] = -1.0
        return G

    def value_at(self, p) -> np.ndarray:
        p = self.chart.wrap(p)
        out = self.func([p[:, i] for i in range(p.shape[1])])
        return _stack(out, len(p))

    def jacobian(self, p) -> np.ndarray:
        """``(N, m, n)`` Jacobian by forward mode, one tangent per axis."""
        p = self.chart.wrap(p)
        n = p.shape[1]
        cols = []
        for a in range(n):
            v = [np.full(len(p), 1.0 if i == a else 0.0) for i in range(n)]
            _, t = dual.jvp(self.func, [p[:, i] for i in range(n)], v)
            cols.append(_stack(t, len(p)))
        return np.stack(cols, axis=2)

    def isometry_residual(self, p) -> float:
        """Max Frobenius norm of ``J^T G_amb J - g`` over the batch."""
        J = self.jacobian(p)
        pull = np.einsum("nai,ab,nbj->nij", J, self.ambient_metric(), J)
        g = metric_eval(self.chart, p)
        return float(np.max(np.linalg.norm(pull - g, axis=(1, 2))))


def _stack(components, count: int) -> np.ndarray:
    cols = [np.broadcast_to(np.asarray(dual.primal(c), dtype=float), (count,)) for c in components]
    return np.stack(cols, axis=1)


def nested_differential(f: EmbeddingMap, order: int, p) -> np.ndarray:
    """``d^order f`` at a batch of jet points of shape ``(N, 2**order * n)``."""
    if order > f.max_order:
        raise ConfigError(f"{f.label}: derivative oracle only reaches order {f.max_order}")
    p = np.array(p, dtype=float, ndmin=2)
    n = f.chart.dim
    if p.shape[1] != (2 ** order) * n:
        raise ConfigError(f"expected {(2 ** order) * n} coordinates for order {order}, got {p.shape[1]}")
    p = p.copy()
    p[:, :n] = f.chart.wrap(p[:, :n])
    out = dual.nested_jet(f.func, [p[:, i] for i in range(p.shape[1])], order)
    return _stack(out, len(p))


def jet_from_derivatives(derivs: list, p: np.ndarray, order: int) -> np.ndarray:
    """Closed-form jets from derivative tensors, orders 0..2.

    ``d^1 f(x, u) = (f, Df u)`` and
    ``d^2 f(x, u, X, U) = (f, Df u, Df X, D2f[X, u] + Df U)``.
    """
    n = derivs[1].shape[2] if len(derivs) > 1 else p.shape[1]
    f0 = derivs[0]
    if order == 0:
        return f0
    Df = derivs[1]
    if order == 1:
        u = p[:, n:2 * n]
        return np.concatenate([f0, np.einsum("nai,ni->na", Df, u)], axis=1)
    if order == 2:
        u, X, U = p[:, n:2 * n], p[:, 2 * n:3 * n], p[:, 3 * n:4 * n]
        D2 = derivs[2]
        return np.concatenate(
            [
                f0,
                np.einsum("nai,ni->na", Df, u),
                np.einsum("nai,ni->na", Df, X),
                np.einsum("naij,ni,nj->na", D2, X, u) + np.einsum("nai,ni->na", Df, U),
            ],
            axis=1,
        )
    raise ConfigError("closed-form jets are only available up to order 2")


# unit bundle sampling ---------------------------------------------------------

@dataclass(frozen=True)
class SampleCounts:
    """Sampling density for ``S^{k+1} M``.

    ``base`` points per axis (or total, for charts with their own sampler);
    ``radii`` nonzero radial shells and ``fiber_dirs`` directions in every
    intermediate fiber ball; ``top_dirs`` unit directions in the top fiber.
    """

    base: int = 128
    radii: int = 2
    fiber_dirs: int = 4
    top_dirs: int = 12

    def __post_init__(self):
        for name in ("base", "radii", "fiber_dirs", "top_dirs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"sample count {name} must be positive")


@dataclass
class UnitBundleSample:
    order: int
    chart: MetricChart
    points: np.ndarray
    fiber_cap: float
    counts: SampleCounts
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)


def unit_directions(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Quasi-uniform unit vectors in ``R^d``, shape ``(k, d)``."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if d == 3:
        pc = fibonacci_sphere(count)
        return np.stack(
            [np.sin(pc[:, 0]) * np.cos(pc[:, 1]), np.sin(pc[:, 0]) * np.sin(pc[:, 1]), np.cos(pc[:, 0])],
            axis=1,
        )
    w = rng.standard_normal((count, d))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _metric_unit_vectors(G: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Map Euclidean unit ``dirs`` to ``G``-unit vectors at every point.

    With ``G = L L^T`` the vectors ``L^{-T} w`` have ``G``-norm ``|w|``.
    Returns shape ``(N, k, d)``.
    """
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NumericError("metric is not positive definite at a sample point") from exc
    W = np.broadcast_to(dirs.T, (G.shape[0],) + dirs.T.shape)
    V = np.linalg.solve(np.swapaxes(L, 1, 2), W)
    return np.swapaxes(V, 1, 2)


def unit_bundle_sample(
    chart: MetricChart,
    order: int,
    counts: SampleCounts = SampleCounts(),
    fiber_cap: float = 1.0,
    seed: int = 0,
    step: float = DEFAULT_FD_STEP,
) -> UnitBundleSample:
    """Sample ``S^order M`` with intermediate fibers truncated at ``fiber_cap``.

    Intermediate fiber vectors are the zero vector plus ``counts.radii`` shells
    of radius ``fiber_cap * i / radii``; norms use the Sasaki metric of the
    level below.  Top vectors are normalised to unit length after choosing
    their directions.  Order 0 returns the base grid.
    """
    if order < 0:
        raise ConfigError("order must be non-negative")
    if fiber_cap <= 0:
        raise ConfigError("fiber cap must be positive")
    rng = np.random.default_rng(seed)
    pts = chart.grid(counts.base)
    for j in range(1, order):
        G = SasakiLevel(j - 1, chart, step).metric_at(pts)
        d = G.shape[1]
        dirs = unit_directions(d, counts.fiber_dirs, rng)
        unit = _metric_unit_vectors(G, dirs)  # (N, k, d)
        radii = fiber_cap * np.arange(1, counts.radii + 1) / counts.radii
        shells = (radii[None, :, None, None] * unit[:, None, :, :]).reshape(len(pts), -1, d)
        vecs = np.concatenate([np.zeros((len(pts), 1, d)), shells], axis=1)
        k = vecs.shape[1]
        pts = np.concatenate([np.repeat(pts, k, axis=0), vecs.reshape(-1, d)], axis=1)
    if order >= 1:
        G = SasakiLevel(order - 1, chart, step).metric_at(pts)
        d = G.shape[1]
        dirs = unit_directions(d, counts.top_dirs, rng)
        unit = _metric_unit_vectors(G, dirs)
        k = unit.shape[1]
        pts = np.concatenate([np.repeat(pts, k, axis=0), unit.reshape(-1, d)], axis=1)
    return UnitBundleSample(order, chart, pts, fiber_cap, counts, seed)


def top_norms(sample: UnitBundleSample, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Sasaki norms of the top-level vectors (all 1 for a valid sample)."""
    if sample.order == 0:
        return np.ones(len(sample.points))
    h = sample.points.shape[1] // 2
    level = SasakiLevel(sample.order - 1, sample.chart, step)
    v = sample.points[:, h:]
    return np.sqrt(sasaki_eval(level, sample.points[:, :h], v, v))


# lifted clouds ----------------------------------------------------------------

@dataclass
class LiftedCloud:
    """``d^order f`` of a unit-bundle sample: points in ``E^{2**order * m}``."""

    points: np.ndarray
    order: int
    m: int
    label: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def blocks(self) -> np.ndarray:
        """View of shape ``(N, 2**order, m)``."""
        return self.points.reshape(len(self.points), 2 ** self.order, self.m)

    def padded(self, m: int) -> "LiftedCloud":
        """Re-embed in ``E^m`` (``m >= self.m``) by appending zero coordinates."""
        if m < self.m:
            raise ConfigError(f"cannot pad from {self.m} down to {m}")
        b = self.blocks
        out = np.zeros((b.shape[0], b.shape[1], m))
        out[:, :, : self.m] = b
        return LiftedCloud(out.reshape(len(b), -1), self.order, m, self.label)

    def to_csv(self, path, comment: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(column_names(self.order, self.m))
            for row in self.points:
                w.writerow([repr(float(x)) for x in row])


def lift_cloud(f: EmbeddingMap, sample: UnitBundleSample) -> LiftedCloud:
    if sample.chart.dim != f.chart.dim:
        raise ConfigError("sample and embedding live on charts of different dimension")
    pts = nested_differential(f, sample.order, sample.points)
    return LiftedCloud(pts, sample.order, f.target_dim, f.label)


class JetLift(TransformerMixin, BaseEstimator):
    """Transformer mapping rows of ``T^order M`` coordinates to ``d^order f``.

    ``fit`` only validates the column count; ``transform`` applies the nested
    differential of ``embedding`` row-wise.
    """

    def __init__(self, embedding: EmbeddingMap = None, order: int = 1):
        self.embedding = embedding
        self.order = order

    def fit(self, X, y=None):
        if self.embedding is None:
            raise ConfigError("JetLift needs an embedding")
        X = check_array(X)
        expected = (2 ** self.order) * self.embedding.chart.dim
        if X.shape[1] != expected:
            raise ConfigError(f"expected {expected} columns, got {X.shape[1]}")
        self.n_features_in_ = X.shape[1]
        self.n_features_out_ = (2 ** self.order) * self.embedding.target_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        X = check_array(X)
        return nested_differential(self.embedding, self.order, X)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(column_names(self.order, self.embedding.target_dim), dtype=object)
