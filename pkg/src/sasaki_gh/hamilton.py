"""C^k norms of symmetric 2-tensors and Hamilton-style convergence.

A sequence of metrics ``g_i`` converges to ``g`` in the C^k sense when there
are diffeomorphisms ``phi_i`` with ``||phi_i^* g_i - g||_{C^k} -> 0``; the norm
sums grid sups of the g-norms of the iterated covariant derivatives.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial import cKDTree

from .alignment import DghConfig, estimate_dgh
from .exceptions import ConfigError, NumericError
from .geometry import DEFAULT_FD_STEP, MetricChart, circle_chart, iterated_covariant, metric_eval, sphere_chart, tensor_norm
from .scenarios import round_family

__all__ = [
    "TensorField02",
    "ChartMap",
    "HamiltonRecord",
    "ConvergenceReport",
    "ck_norm",
    "pullback_metric",
    "metric_field",
    "hamilton_converges",
    "equivalence_experiment",
    "MIN_GRID",
]

log = logging.getLogger(__name__)

MIN_GRID = 8
_CHUNK = 4096
_SYM_TOL = 1e-10


@dataclass(frozen=True)
class TensorField02:
    """A symmetric (0,2)-tensor field given in the coordinates of ``chart``.

    ``evaluator`` maps points ``(N, n)`` to matrices ``(N, n, n)``.  Fields
    add, subtract and scale pointwise.
    """

    chart: MetricChart
    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __call__(self, p) -> np.ndarray:
        p = np.array(p, dtype=float, ndmin=2)
        n = self.chart.dim
        S = np.asarray(self.evaluator(p), dtype=float)
        S = np.broadcast_to(S, (len(p), n, n))
        asym = np.max(np.abs(S - np.swapaxes(S, 1, 2)), initial=0.0)
        if asym > _SYM_TOL * max(1.0, np.max(np.abs(S), initial=0.0)):
            raise NumericError(f"{self.label or 'tensor field'} is not symmetric (gap {asym:.3g})")
        return S

    def _combine(self, other, op, label):
        if not isinstance(other, TensorField02):
            return NotImplemented
        if other.chart.dim != self.chart.dim:
            raise ConfigError("tensor fields live on charts of different dimension")
        return TensorField02(self.chart, lambda p: op(self(p), other(p)), label)

    def __add__(self, other):
        return self._combine(other, np.add, f"({self.label} + {other.label})")

    def __sub__(self, other):
        return self._combine(other, np.subtract, f"({self.label} - {other.label})")

    def __mul__(self, c):
        c = float(c)
        return TensorField02(self.chart, lambda p: c * self(p), f"{c:g}*{self.label}")

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self


def metric_field(chart: MetricChart) -> TensorField02:
    """The metric of ``chart`` as a tensor field."""
    return TensorField02(chart, lambda p: metric_eval(chart, p), f"g[{chart.label}]")


@dataclass(frozen=True)
class ChartMap:
    """A smooth map between charts with its Jacobian ``(N, m, n)``."""

    func: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    @classmethod
    def identity(cls, n: int) -> "ChartMap":
        return cls(lambda p: np.array(p, dtype=float, ndmin=2), lambda p: np.broadcast_to(np.eye(n), (len(p), n, n)), "id")


def pullback_metric(phi: ChartMap, source: MetricChart, target: MetricChart) -> TensorField02:
    """``(phi^* g)_p = J(p)^T g(phi(p)) J(p)`` as a field on ``source``.

    Raises ``NumericError`` at the first point where the Jacobian is singular.
    """

    def evaluate(p):
        J = np.asarray(phi.jacobian(p), dtype=float)
        J = np.broadcast_to(J, (len(p), target.dim, source.dim))
        sv = np.linalg.svd(J, compute_uv=False)
        bad = np.nonzero(sv[:, -1] <= 1e-12 * np.maximum(sv[:, 0], 1e-300))[0]
        if len(bad):
            raise NumericError(f"Jacobian of {phi.label or 'map'} is singular at {np.asarray(p)[bad[0]].tolist()}")
        g = metric_eval(target, phi.func(p))
        S = np.einsum("nai,nab,nbj->nij", J, g, J)
        return 0.5 * (S + np.swapaxes(S, 1, 2))

    return TensorField02(source, evaluate, f"{phi.label or 'phi'}^*g[{target.label}]")


def _grid_points(chart: MetricChart, grid: int, k: int, step: float) -> np.ndarray:
    if grid < MIN_GRID:
        raise ConfigError(f"grid of {grid} points per axis is too coarse (minimum {MIN_GRID})")
    if chart.sampler is None:
        pts = chart.grid(grid)
        spacing = min((hi - lo) / grid for lo, hi in chart.bounds if np.isfinite(hi - lo))
    else:
        pts = chart.grid(grid ** chart.dim)
        d, _ = cKDTree(pts).query(pts, k=2)
        spacing = float(np.min(d[:, 1]))
    if k > 0 and spacing <= 2 * k * step:
        raise ConfigError(
            f"grid spacing {spacing:.3g} does not resolve the finite-difference stencil "
            f"({k} derivatives of step {step:g}); use a coarser grid or a smaller step"
        )
    # stencils must stay inside non-periodic axes
    margin = (k + 2) * step
    keep = np.ones(len(pts), dtype=bool)
    for a, ((lo, hi), per) in enumerate(zip(chart.bounds, chart.periodic)):
        if not per:
            keep &= (pts[:, a] > lo + margin) & (pts[:, a] < hi - margin)
    return pts[keep]


def ck_norm(sigma: TensorField02, chart: MetricChart, k: int, grid: int = 512, step: float = DEFAULT_FD_STEP) -> float:
    """``sum_{i<=k} sup_p |nabla^i sigma|_g`` over a base grid of ``chart``.

    Covariant derivatives use the Levi-Civita connection of ``chart``'s
    metric and nested central differences of step ``step``; the norms are the
    g-induced Frobenius norms.  ``grid`` counts points per axis.
    """
    if k < 0:
        raise ConfigError("k must be non-negative")
    if sigma.chart.dim != chart.dim:
        raise ConfigError("tensor field and metric chart have different dimensions")
    pts = _grid_points(chart, grid, k, step)
    total = 0.0
    for i in range(k + 1):
        D = iterated_covariant(sigma, chart, i, step, rank=2)
        sup = 0.0
        for s in range(0, len(pts), _CHUNK):
            p = pts[s:s + _CHUNK]
            T = np.asarray(D(p))
            sup = max(sup, float(np.max(tensor_norm(T, metric_eval(chart, p), 2 + i))))
        total += sup
    return total


@dataclass
class HamiltonRecord:
    i: int
    radius: Optional[float]
    dgh: Optional[float]
    ck: float
    runtime_ms: float

    def as_row(self) -> list:
        return [self.i, self.radius, self.dgh, self.ck, self.runtime_ms]


@dataclass
class ConvergenceReport:
    """Per-index distances and norms, plus convergence verdicts.

    A column *converges* when it is strictly decreasing and its last value is
    at most ``tol`` (or, with ``tol=None``, at most half of its first value).
    """

    label: str
    records: list = field(default_factory=list)
    tol: Optional[float] = None

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.i)
        for r in self.records:
            if r.ck < 0 or (r.dgh is not None and r.dgh < 0):
                raise NumericError(f"negative value in record {r.i}")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def decreasing(self, name: str) -> bool:
        v = self.column(name)
        return len(v) > 1 and bool(np.all(np.diff(v) < 0))

    def converges(self, name: str) -> bool:
        v = self.column(name)
        if len(v) == 0 or np.any(np.isnan(v)):
            return False
        bound = self.tol if self.tol is not None else 0.5 * v[0]
        return bool(self.decreasing(name) and v[-1] <= bound)

    @property
    def verdict(self) -> dict:
        out = {"ck_converges": self.converges("ck"), "ck_decreasing": self.decreasing("ck")}
        if self.records and all(r.dgh is not None for r in self.records):
            out["dgh_converges"] = self.converges("dgh")
            out["dgh_decreasing"] = self.decreasing("dgh")
            out["agree"] = out["dgh_converges"] == out["ck_converges"]
        return out


def hamilton_converges(sequence: Sequence, g: MetricChart, k: int, tol: float, grid: int = 512, step: float = DEFAULT_FD_STEP, label: str = "") -> ConvergenceReport:
    """Norms ``||phi_i^* g_i - g||_{C^k}`` for ``sequence`` of ``(g_i, phi_i)``.

    ``phi_i`` may be ``None`` for the identity.  Records are indexed from 1.
    """
    records = []
    for i, (gi, phi) in enumerate(sequence, start=1):
        t0 = time.perf_counter()
        phi = phi or ChartMap.identity(g.dim)
        sigma = pullback_metric(phi, g, gi) - metric_field(g)
        ck = ck_norm(sigma, g, k, grid, step)
        records.append(HamiltonRecord(i, None, None, ck, 1e3 * (time.perf_counter() - t0)))
    return ConvergenceReport(label or "hamilton", records, tol)


def _round_chart(n: int, r: float) -> MetricChart:
    if n == 1:
        return circle_chart(r)
    if n == 2:
        return sphere_chart(r)
    raise ConfigError(f"round spheres support n in (1, 2), got {n}")


def _equivalence_record(i, ri, r, n, order, cfg, grid, step):
    t0 = time.perf_counter()
    est = estimate_dgh(round_family(n, r), round_family(n, ri), order, cfg)
    g = _round_chart(n, r)
    sigma = pullback_metric(ChartMap.identity(n), g, _round_chart(n, ri)) - metric_field(g)
    ck = ck_norm(sigma, g, order - 1, grid, step)
    return HamiltonRecord(i, float(ri), est.value, ck, 1e3 * (time.perf_counter() - t0))


def equivalence_experiment(
    radii: Sequence[float],
    r: float = 1.0,
    order: int = 2,
    cfg: Optional[DghConfig] = None,
    n: int = 1,
    grid: int = 512,
    step: float = DEFAULT_FD_STEP,
    n_jobs: int = 1,
    label: str = "",
) -> ConvergenceReport:
    """Lifted distance and C^{order-1} norm for ``round(r_i)`` against ``round(r)``.

    Repeated radii are computed once; their records share the measured
    runtime.  ``n_jobs`` parallelises over distinct radii.
    """
    if order < 1:
        raise ConfigError("order must be at least 1")
    cfg = cfg or DghConfig()
    radii = [float(x) for x in radii]
    distinct = list(dict.fromkeys(radii))
    done = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_equivalence_record)(0, ri, r, n, order, cfg, grid, step) for ri in distinct
    )
    by_radius = dict(zip(distinct, done))
    records = []
    for i, ri in enumerate(radii, start=1):
        rec = by_radius[ri]
        records.append(HamiltonRecord(i, ri, rec.dgh, rec.ck, rec.runtime_ms))
        log.info("equivalence %d: r=%g dgh=%.6g ck=%.6g", i, ri, rec.dgh, rec.ck)
    return ConvergenceReport(label or f"round{n}->r={r:g}", records)
