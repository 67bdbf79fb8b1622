"""Approximating the lifted Gromov-Hausdorff infimum by rigid alignment.

Only rigid motions of the common Euclidean target (and declared family shape
parameters) are searched.  A rigid motion ``x -> A x + b`` lifts to every jet
block as ``A``, with the translation acting on the base block only, which is
an isometry of the flat lifted space.  Because of that, distances from the
fixed cloud to the moved one are computed by pulling the fixed cloud back
with the inverse motion, so both k-d trees are built once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .exceptions import ConfigError
from .hausdorff import hausdorff, hausdorff_brute
from .geometry import iterated_covariant, metric_eval, tensor_norm
from .jets import EmbeddingMap, LiftedCloud, SampleCounts, lift_cloud, unit_bundle_sample

__all__ = [
    "RigidMotion",
    "DghConfig",
    "DghEstimate",
    "DghEstimator",
    "align_clouds",
    "embedding_ck1_norm",
    "estimate_dgh",
    "lift_family",
    "lifted_hausdorff",
    "lifted_rigid_apply",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RigidMotion:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if R.shape != (len(t), len(t)):
            raise ConfigError("rotation and translation dimensions disagree")
        if not np.allclose(R.T @ R, np.eye(len(t)), atol=1e-12):
            raise ConfigError("rotation is not orthogonal")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return len(self.translation)

    @classmethod
    def identity(cls, m: int) -> "RigidMotion":
        return cls(np.eye(m), np.zeros(m))

    @classmethod
    def from_params(cls, m: int, params, reflect: bool = False) -> "RigidMotion":
        """``m(m-1)/2`` rotation generators then ``m`` translations.

        The generators fill a skew matrix whose exponential is the rotation;
        for ``m = 2`` that is the angle, for ``m = 3`` the axis-angle vector.
        """
        params = np.asarray(params, dtype=float)
        k = m * (m - 1) // 2
        if params.shape != (k + m,):
            raise ConfigError(f"expected {k + m} motion parameters for m={m}")
        S = np.zeros((m, m))
        if m == 3:
            wx, wy, wz = params[:3]
            S = np.array([[0, -wz, wy], [wz, 0, -wx], [-wy, wx, 0]])
        else:
            iu = np.triu_indices(m, 1)
            S[iu] = -params[:k]
            S = S - S.T
        R = expm(S)
        # re-orthogonalise against expm round-off
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
        if reflect:
            R = R @ np.diag([-1.0] + [1.0] * (m - 1))
        return cls(R, params[k:])

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x @ self.rotation.T + self.translation

    def inverse(self) -> "RigidMotion":
        return RigidMotion(self.rotation.T, -self.rotation.T @ self.translation)


def lifted_rigid_apply(cloud: LiftedCloud, motion: RigidMotion) -> LiftedCloud:
    """Apply ``d^order`` of a rigid motion: rotate every block, shift the base."""
    if motion.dim != cloud.m:
        raise ConfigError(f"motion acts on E^{motion.dim}, cloud lives over E^{cloud.m}")
    b = cloud.blocks @ motion.rotation.T
    b[:, 0, :] += motion.translation
    return LiftedCloud(b.reshape(len(cloud), -1), cloud.order, cloud.m, cloud.label)


def _lifted_apply_points(points, order, m, R, t):
    b = points.reshape(len(points), 2 ** order, m) @ R.T
    b[:, 0, :] += t
    return b.reshape(len(points), -1)


# estimate ----------------------------------------------------------------------

@dataclass
class DghConfig:
    fiber_cap: float = 1.0
    counts: SampleCounts = field(default_factory=SampleCounts)
    restarts: int = 8
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    reflections: bool = False
    n_jobs: Optional[int] = 1
    coarse_fraction: float = 0.25
    coarse_min: int = 1024

    def __post_init__(self):
        if self.restarts < 1 or self.max_iter < 1:
            raise ConfigError("restarts and max_iter must be positive")
        if not self.tol > 0 or not self.fiber_cap > 0:
            raise ConfigError("tol and fiber_cap must be positive")


@dataclass
class RestartTrace:
    index: int
    start: list
    best: list
    value: float
    start_value: float
    iterations: int
    evaluations: int
    message: str


@dataclass
class DghEstimate:
    value: float
    order: int
    fiber_cap: float
    sample_sizes: tuple
    initial_value: float
    motion: RigidMotion
    shape_params: dict
    best_restart: int
    restarts: list = field(default_factory=list)

    @property
    def improved(self) -> bool:
        return self.value < self.initial_value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "order": self.order,
            "fiber_cap": self.fiber_cap,
            "sample_sizes": list(self.sample_sizes),
            "initial_value": self.initial_value,
            "improved": self.improved,
            "best_restart": self.best_restart,
            "rotation": self.motion.rotation.tolist(),
            "translation": self.motion.translation.tolist(),
            "shape_params": self.shape_params,
            "restarts": [vars(r) for r in self.restarts],
        }


class _Objective:
    """Hausdorff distance between the fixed cloud and a moved, reshaped one.

    ``subset`` optionally restricts both clouds to fixed row indices (the
    coarse stage); the same rows are taken from every rebuilt moving cloud.
    """

    def __init__(self, fixed: LiftedCloud, build_moving, shape_names, m, reflect, subset=None):
        self.fixed_pts = fixed.points if subset is None else fixed.points[subset[0]]
        self.order = fixed.order
        self.fixed_tree = cKDTree(self.fixed_pts)
        self.build_moving = build_moving
        self.shape_names = shape_names
        self.m = m
        self.k = m * (m - 1) // 2 + m
        self.reflect = reflect
        self.subset = subset
        self._shape_key = None
        self.moving_pts = None
        self.moving_tree = None

    def _moving_for(self, shape):
        key = tuple(np.round(shape, 15))
        if key != self._shape_key:
            pts = build_padded(self.build_moving(dict(zip(self.shape_names, shape))), self.m).points
            self.moving_pts = pts if self.subset is None else pts[self.subset[1]]
            self.moving_tree = cKDTree(self.moving_pts)
            self._shape_key = key
        return self.moving_pts

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        moving = self._moving_for(x[self.k:])
        motion = RigidMotion.from_params(self.m, x[: self.k], self.reflect)
        moved = _lifted_apply_points(moving, self.order, self.m, motion.rotation, motion.translation)
        d1, _ = self.fixed_tree.query(moved, k=1)
        inv = motion.inverse()
        pulled = _lifted_apply_points(self.fixed_pts, self.order, self.m, inv.rotation, inv.translation)
        d2, _ = self.moving_tree.query(pulled, k=1)
        return float(max(d1.max(), d2.max()))


def build_padded(cloud: LiftedCloud, m: int) -> LiftedCloud:
    return cloud if cloud.m == m else cloud.padded(m)


def _base_centroid(cloud: LiftedCloud) -> np.ndarray:
    return cloud.blocks[:, 0, :].mean(axis=0)


def _start_points(fixed, moving, m, restarts, rng, shape0):
    """Restart 0 is the identity; the rest match base centroids, varying rotation."""
    k = m * (m - 1) // 2
    cf, cm = _base_centroid(fixed), _base_centroid(moving)
    starts = [np.concatenate([np.zeros(k + m), shape0])]
    for j in range(1, restarts):
        if j == 1:
            rot = np.zeros(k)
        elif m == 2:
            rot = np.array([2 * np.pi * (j - 1) / (restarts - 1)])
        else:
            rot = rng.normal(size=k)
            rot *= rng.uniform(0, np.pi) / max(np.linalg.norm(rot), 1e-12)
        R = RigidMotion.from_params(m, np.concatenate([rot, np.zeros(m)])).rotation
        starts.append(np.concatenate([rot, cf - R @ cm, shape0]))
    return starts


def _initial_simplex(x0, k, m, scale, bounds, shrink=1.0):
    steps = np.concatenate([np.full(k, 0.25), np.full(m, 0.1 * scale)]) * shrink
    shape_steps = [0.1 * shrink * (hi - lo) for lo, hi in bounds]
    steps = np.concatenate([steps, shape_steps])
    sim = [x0]
    for i, s in enumerate(steps):
        v = x0.copy()
        v[i] += s
        if i >= k + m:
            lo, hi = bounds[i - k - m]
            if v[i] > hi:
                v[i] = x0[i] - s
        sim.append(v)
    return np.array(sim)


def _nelder_mead(obj, j, x0, k, m, scale, bounds, cfg, shrink=1.0):
    nm_bounds = [(None, None)] * (k + m) + list(bounds) if bounds else None
    start_value = obj(x0)
    res = minimize(
        obj,
        x0,
        method="Nelder-Mead",
        bounds=nm_bounds,
        options={
            "maxiter": cfg.max_iter,
            "xatol": cfg.tol,
            "fatol": np.inf,
            "initial_simplex": _initial_simplex(x0, k, m, scale, bounds, shrink),
        },
    )
    best_x, best_f = (res.x, float(res.fun)) if res.fun <= start_value else (x0, start_value)
    return RestartTrace(
        j, x0.tolist(), np.asarray(best_x).tolist(), best_f, start_value,
        int(res.nit), int(res.nfev), str(res.message),
    )


def _coarse_subset(n_fixed, n_moving, cfg, rng):
    if cfg.coarse_fraction >= 1.0 or min(n_fixed, n_moving) < cfg.coarse_min:
        return None
    pick = lambda n: np.sort(rng.choice(n, max(cfg.coarse_min, int(cfg.coarse_fraction * n)), replace=False))  # noqa: E731
    return pick(n_fixed), pick(n_moving)


def align_clouds(fixed: LiftedCloud, build_moving, shape_params: dict, shape_bounds: dict, cfg: DghConfig) -> DghEstimate:
    """Minimise the Hausdorff distance over rigid motions (and shape parameters).

    ``build_moving(params) -> LiftedCloud`` produces the moving cloud for a
    given dict of shape parameters.  Restarts run on a seeded random subset of
    both clouds when they are large; the best coarse optimum is then polished
    on the full clouds, which alone determine the reported value.  Restart 0
    starts at the identity, so the value never exceeds the unaligned distance.
    Deterministic given ``cfg.seed``; ties go to the lowest restart index.
    """
    names = sorted(shape_bounds)
    bounds = [tuple(shape_bounds[n]) for n in names]
    for lo, hi in bounds:
        if not lo < hi:
            raise ConfigError(f"invalid shape bounds {(lo, hi)}")
    shape0 = np.array([shape_params[n] for n in names], dtype=float)
    probe = build_moving(dict(zip(names, shape0)))
    if probe.order != fixed.order:
        raise ConfigError("clouds were lifted to different orders")
    m = max(fixed.m, probe.m)
    fixed = build_padded(fixed, m)
    probe = build_padded(probe, m)
    k = m * (m - 1) // 2
    rng = np.random.default_rng(cfg.seed)
    starts = _start_points(fixed, probe, m, cfg.restarts, rng, shape0)
    subset = _coarse_subset(len(fixed), len(probe), cfg, rng)
    base = fixed.blocks[:, 0, :]
    scale = max(float(np.sqrt(np.mean(np.sum((base - base.mean(0)) ** 2, axis=1)))), 1e-3)

    def run(j, x0):
        obj = _Objective(fixed, build_moving, names, m, cfg.reflections, subset)
        return _nelder_mead(obj, j, x0, k, m, scale, bounds, cfg)

    traces = Parallel(n_jobs=cfg.n_jobs, prefer="threads")(delayed(run)(j, x0) for j, x0 in enumerate(starts))
    best = min(traces, key=lambda t: (t.value, t.index))
    full = _Objective(fixed, build_moving, names, m, cfg.reflections)
    initial_value = full(starts[0])
    candidates = [(initial_value, -1, starts[0])]
    if subset is not None:
        polish = _nelder_mead(full, cfg.restarts, np.asarray(best.best), k, m, scale, bounds, cfg, shrink=0.1)
        polish.message = "polish: " + polish.message
        traces.append(polish)
        candidates.append((polish.value, polish.index, np.asarray(polish.best)))
    else:
        candidates.append((best.value, best.index, np.asarray(best.best)))
    value, winner, x = min(candidates, key=lambda c: (c[0], c[1]))
    motion = RigidMotion.from_params(m, x[: k + m], cfg.reflections)
    log.debug("alignment: winner %d value %.6g", winner, value)
    return DghEstimate(
        value=float(value),
        order=fixed.order,
        fiber_cap=cfg.fiber_cap,
        sample_sizes=(len(fixed), len(probe)),
        initial_value=float(initial_value),
        motion=motion,
        shape_params=dict(zip(names, x[k + m:].tolist())),
        best_restart=max(winner, 0),
        restarts=traces,
    )


def lift_family(family, order: int, cfg: DghConfig, params: Optional[dict] = None) -> LiftedCloud:
    fam = family.with_params(**params) if params else family
    emb = fam.embedding
    if emb.ambient != "euclidean":
        raise ConfigError(f"{family.name}: lifted distances need a Euclidean target")
    sample = unit_bundle_sample(emb.chart, order, cfg.counts, cfg.fiber_cap, cfg.seed)
    return lift_cloud(emb, sample)


def estimate_dgh(famA, famB, order: int = 2, cfg: Optional[DghConfig] = None) -> DghEstimate:
    """Estimate the lifted distance between two embedding families.

    ``famA``'s lift stays fixed; rigid motions of ``famB``'s lift, plus its
    declared shape parameters, are searched by multi-start Nelder-Mead.
    """
    cfg = cfg or DghConfig()
    fixed = lift_family(famA, order, cfg)
    build = lambda params: lift_family(famB, order, cfg, params)  # noqa: E731
    return align_clouds(fixed, build, dict(famB.params), dict(famB.shape_bounds), cfg)


class DghEstimator(BaseEstimator):
    """Estimator wrapper: ``fit(family_a, family_b)`` sets ``value_``.

    Hyper-parameters mirror :class:`DghConfig` so the estimator plays with
    ``get_params``/``set_params`` and parameter sweeps.
    """

    def __init__(
        self,
        order=2,
        fiber_cap=1.0,
        base_count=128,
        radii=2,
        fiber_dirs=4,
        top_dirs=12,
        restarts=8,
        max_iter=500,
        tol=1e-6,
        seed=0,
        n_jobs=1,
    ):
        self.order = order
        self.fiber_cap = fiber_cap
        self.base_count = base_count
        self.radii = radii
        self.fiber_dirs = fiber_dirs
        self.top_dirs = top_dirs
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.n_jobs = n_jobs

    def config(self) -> DghConfig:
        return DghConfig(
            fiber_cap=self.fiber_cap,
            counts=SampleCounts(self.base_count, self.radii, self.fiber_dirs, self.top_dirs),
            restarts=self.restarts,
            max_iter=self.max_iter,
            tol=self.tol,
            seed=self.seed,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        if y is None:
            raise ConfigError("DghEstimator.fit needs two families: fit(family_a, family_b)")
        self.estimate_ = estimate_dgh(X, y, self.order, self.config())
        self.value_ = self.estimate_.value
        self.motion_ = self.estimate_.motion
        return self


# C^{k+1} norm of an embedding ---------------------------------------------------------

def embedding_ck1_norm(f: EmbeddingMap, order: int, grid: int = 256, step: float = 1e-4) -> float:
    """Sum over ``i = 0..order`` of the grid sup of ``|nabla^i f|``.

    Order 0 and 1 are exact (value and forward-mode Jacobian); higher orders
    take covariant finite differences of the Jacobian.  Norms are measured
    with the chart metric on the source and the Euclidean metric on the target.
    """
    p = f.chart.grid(grid)
    if any(not per for per in f.chart.periodic):
        # keep finite-difference stencils inside non-periodic axes
        for a, ((lo, hi), per) in enumerate(zip(f.chart.bounds, f.chart.periodic)):
            if not per:
                p = p[(p[:, a] - lo > 2 * order * step) & (hi - p[:, a] > 2 * order * step)]
    g = metric_eval(f.chart, p)
    total = float(np.max(np.linalg.norm(f.value_at(p), axis=1)))
    if order >= 1:
        jac = lambda q: f.jacobian(q)  # noqa: E731
        total += float(np.max(tensor_norm(jac(p), g, 1)))
        for i in range(2, order + 1):
            Ti = iterated_covariant(jac, f.chart, i - 1, step, rank=1)(p)
            total += float(np.max(tensor_norm(Ti, g, i)))
    return total


def lifted_hausdorff(famA, famB, order: int, cfg: Optional[DghConfig] = None, brute: bool = False) -> float:
    """Hausdorff distance between the two lifts as they stand (no alignment)."""
    cfg = cfg or DghConfig()
    A, B = lift_family(famA, order, cfg), lift_family(famB, order, cfg)
    m = max(A.m, B.m)
    A, B = build_padded(A, m), build_padded(B, m)
    return hausdorff_brute(A.points, B.points) if brute else hausdorff(A.points, B.points)
