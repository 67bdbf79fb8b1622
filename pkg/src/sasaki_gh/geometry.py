"""Coordinate charts, Levi-Civita connections and the Lorentz model.

All evaluators are vectorised: a batch of points has shape ``(N, n)``, metrics
come back as ``(N, n, n)`` and Christoffel symbols as ``(N, n, n, n)`` indexed
``[point, k, i, j]`` for ``Gamma^k_{ij}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DomainError, NumericError

DEFAULT_FD_STEP = 1e-4
TOL_HYP = 1e-8


@dataclass(frozen=True)
class MetricChart:
    """A coordinate chart carrying a Riemannian metric.

    ``bounds`` holds one ``(lo, hi)`` pair per axis; periodic axes wrap modulo
    ``hi - lo``.  ``christoffel_fn`` is an optional analytic override; without
    it the connection is obtained from central differences of the metric.
    ``sampler`` optionally replaces the default tensor-product base grid.
    """

    dim: int
    bounds: tuple
    periodic: tuple
    metric_fn: Callable[[np.ndarray], np.ndarray]
    christoffel_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""
    sampler: Optional[Callable[[int], np.ndarray]] = field(default=None, compare=False)

    def wrap(self, p) -> np.ndarray:
        """Wrap periodic axes and reject points outside non-periodic ones."""
        p = np.array(p, dtype=float, ndmin=2)
        if p.shape[-1] != self.dim:
            raise DomainError(f"{self.label}: expected {self.dim} coordinates, got {p.shape[-1]}")
        for a, ((lo, hi), per) in enumerate(zip(self.bounds, self.periodic)):
            if per:
                p[:, a] = lo + np.mod(p[:, a] - lo, hi - lo)
            elif np.any(p[:, a] < lo) or np.any(p[:, a] > hi):
                raise DomainError(f"{self.label}: coordinate {a} outside [{lo}, {hi}]")
        return p

    def metric_at(self, p) -> np.ndarray:
        return metric_eval(self, p)

    def christoffel_at(self, p, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        return christoffel(self, p, step)

    def grid(self, count: int) -> np.ndarray:
        """Base points for sampling: ``count`` per axis unless a sampler is set."""
        if self.sampler is not None:
            return self.wrap(self.sampler(count))
        axes = []
        for (lo, hi), per in zip(self.bounds, self.periodic):
            if per:
                axes.append(lo + (hi - lo) * np.arange(count) / count)
            else:
                lo_f = lo if np.isfinite(lo) else -1.0
                hi_f = hi if np.isfinite(hi) else 1.0
                axes.append(np.linspace(lo_f, hi_f, count))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def metric_eval(chart: MetricChart, p) -> np.ndarray:
    """Metric matrices at a batch of points, shape ``(N, n, n)``."""
    p = chart.wrap(p)
    g = np.asarray(chart.metric_fn(p), dtype=float)
    return np.broadcast_to(g, (p.shape[0], chart.dim, chart.dim)).copy()


def christoffel(chart: MetricChart, p, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_{ij}`` of the Levi-Civita connection.

    Uses the analytic override when the chart has one.  Otherwise the metric is
    differentiated with central differences of width ``step``; on
    non-periodic axes the point must sit at least ``2*step`` from the boundary.
    """
    p = chart.wrap(p)
    if chart.christoffel_fn is not None:
        gam = np.asarray(chart.christoffel_fn(p), dtype=float)
        return np.broadcast_to(gam, (p.shape[0],) + (chart.dim,) * 3).copy()
    for a, ((lo, hi), per) in enumerate(zip(chart.bounds, chart.periodic)):
        if not per and (np.any(p[:, a] - lo < 2 * step) or np.any(hi - p[:, a] < 2 * step)):
            raise DomainError(f"{chart.label}: point too close to boundary on axis {a}")
    n = chart.dim
    dg = metric_derivative(chart, p, step)  # [N, a, i, j] = d_a g_ij
    g = metric_eval(chart, p)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{chart.label}: singular metric") from exc
    # first kind: Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (
        np.einsum("nijl->nlij", dg)
        + np.einsum("njil->nlij", dg)
        - dg
    )
    gam = np.einsum("nkl,nlij->nkij", ginv, first)
    return 0.5 * (gam + np.swapaxes(gam, 2, 3)) if n > 1 else gam


def metric_derivative(chart: MetricChart, p, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference ``d_a g_ij`` with shape ``(N, n, n, n)`` (axis ``a`` first)."""
    p = np.array(p, dtype=float, ndmin=2)
    n = chart.dim
    out = np.empty((p.shape[0], n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        out[:, a] = (chart.metric_fn(p + e) - chart.metric_fn(p - e)) / (2 * step)
    return out


def compatibility_residual(chart: MetricChart, p, step: float = DEFAULT_FD_STEP) -> float:
    """Max of ``|d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il|`` over the batch."""
    p = chart.wrap(p)
    dg = metric_derivative(chart, p, step)
    g = metric_eval(chart, p)
    gam = christoffel(chart, p, step)
    rhs = np.einsum("nlki,nlj->nkij", gam, g) + np.einsum("nlkj,nil->nkij", gam, g)
    return float(np.max(np.abs(dg - rhs)))


# model charts -----------------------------------------------------------

def flat_chart(n: int, bounds: Optional[Sequence] = None, label: str = "") -> MetricChart:
    bounds = tuple(bounds) if bounds is not None else ((-np.inf, np.inf),) * n
    return MetricChart(
        dim=n,
        bounds=tuple(tuple(b) for b in bounds),
        periodic=(False,) * n,
        metric_fn=lambda p: np.broadcast_to(np.eye(n), (len(p), n, n)),
        christoffel_fn=lambda p: np.zeros((len(p), n, n, n)),
        label=label or f"E^{n}",
    )


def circle_chart(r: float, analytic: bool = True) -> MetricChart:
    """Angle chart of the round circle of radius ``r`` (metric ``r^2 dtheta^2``)."""
    return MetricChart(
        dim=1,
        bounds=((0.0, 2 * np.pi),),
        periodic=(True,),
        metric_fn=lambda p: np.full((len(p), 1, 1), r * r),
        christoffel_fn=(lambda p: np.zeros((len(p), 1, 1, 1))) if analytic else None,
        label=f"S^1(r={r:g})",
    )


def fibonacci_sphere(count: int) -> np.ndarray:
    """``count`` quasi-uniform polar coordinates ``(phi, theta)``, poles excluded."""
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    theta = np.mod(np.pi * (1.0 + np.sqrt(5.0)) * i, 2 * np.pi)
    return np.stack([phi, theta], axis=1)


def _sphere_gamma(p):
    phi = p[:, 0]
    gam = np.zeros((len(p), 2, 2, 2))
    gam[:, 0, 1, 1] = -np.sin(phi) * np.cos(phi)
    cot = np.cos(phi) / np.sin(phi)
    gam[:, 1, 0, 1] = cot
    gam[:, 1, 1, 0] = cot
    return gam


def sphere_chart(r: float, analytic: bool = True) -> MetricChart:
    """Polar chart ``(phi, theta)`` of the round 2-sphere of radius ``r``."""

    def metric(p):
        g = np.zeros((len(p), 2, 2))
        g[:, 0, 0] = r * r
        g[:, 1, 1] = (r * np.sin(p[:, 0])) ** 2
        return g

    return MetricChart(
        dim=2,
        bounds=((0.0, np.pi), (0.0, 2 * np.pi)),
        periodic=(False, True),
        metric_fn=metric,
        christoffel_fn=_sphere_gamma if analytic else None,
        label=f"S^2(r={r:g})",
        sampler=fibonacci_sphere,
    )


# Lorentz ambient ----------------------------------------------------------

@dataclass(frozen=True)
class LorentzAmbient:
    """``R^{n+2}_1`` with signature ``(-, +, ..., +)``."""

    spatial_dim: int  # n + 1

    @property
    def dim(self) -> int:
        return self.spatial_dim + 1

    def metric(self) -> np.ndarray:
        return np.diag([-1.0] + [1.0] * self.spatial_dim)

    def inner(self, p, q):
        return lorentz_inner(p, q)


def lorentz_inner(p, q):
    """``-p_1 q_1 + sum_{i>=2} p_i q_i`` along the last axis."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(f"dimension mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    return np.sum(p[..., 1:] * q[..., 1:], axis=-1) - p[..., 0] * q[..., 0]


def check_on_hyperboloid(p, rt: float, tol: float = TOL_HYP) -> None:
    p = np.asarray(p, dtype=float)
    resid = np.abs(lorentz_inner(p, p) + rt * rt) / (rt * rt)
    if np.any(resid > tol) or np.any(p[..., 0] <= 0):
        raise NumericError(f"points are not on the upper hyperboloid of radius {rt:g}")


def hyperbolic_distance(p, q, rt: float, validate: bool = True):
    """Intrinsic distance on ``H^{n+1}(-rt^-2)`` realised in the Lorentz model."""
    if validate:
        check_on_hyperboloid(p, rt)
        check_on_hyperboloid(q, rt)
    arg = -lorentz_inner(p, q) / (rt * rt)
    return rt * np.arccosh(np.maximum(arg, 1.0))


# tensor calculus ----------------------------------------------------------

def covariant_derivative(field_fn, chart: MetricChart, p, step: float = DEFAULT_FD_STEP, rank: int = 2):
    """One Levi-Civita covariant derivative of a covariant tensor field.

    ``field_fn`` maps points ``(N, n)`` to arrays ``(N, *extra, n, ..., n)``
    whose last ``rank`` axes are covariant indices; any ``extra`` axes are
    carried along untouched (vector-valued fields).  The new derivative index
    is appended last.  Partial derivatives are central differences.
    """
    p = np.array(p, dtype=float, ndmin=2)
    n = chart.dim
    parts = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        parts.append((np.asarray(field_fn(p + e)) - np.asarray(field_fn(p - e))) / (2 * step))
    out = np.stack(parts, axis=-1)
    if rank == 0:
        return out
    T = np.asarray(field_fn(p))
    gam = christoffel(chart, p, step)
    first = T.ndim - rank
    for j in range(rank):
        q = first + j
        Tm = np.moveaxis(T, q, -1)
        corr = np.einsum("n...c,ncab->n...ba", Tm, gam)
        out = out - np.moveaxis(corr, -2, q)
    return out


def iterated_covariant(field_fn, chart: MetricChart, order: int, step: float = DEFAULT_FD_STEP, rank: int = 2):
    """Return a callable evaluating ``nabla^order`` of the field."""
    fn = field_fn
    for i in range(order):
        fn = _nabla(fn, chart, step, rank + i)
    return fn


def _nabla(fn, chart, step, rank):
    return lambda q: covariant_derivative(fn, chart, q, step, rank)


def tensor_norm(T: np.ndarray, g: np.ndarray, rank: int) -> np.ndarray:
    """Pointwise norm induced by ``g`` on the last ``rank`` covariant indices."""
    L = np.linalg.cholesky(g)
    E = np.linalg.inv(np.swapaxes(L, 1, 2))  # columns: g-orthonormal frame
    first = T.ndim - rank
    for j in range(rank):
        q = first + j
        Tm = np.moveaxis(T, q, -1)
        Tm = np.einsum("n...c,nci->n...i", Tm, E)
        T = np.moveaxis(Tm, -1, q)
    return np.sqrt(np.sum(T.reshape(T.shape[0], -1) ** 2, axis=1))
