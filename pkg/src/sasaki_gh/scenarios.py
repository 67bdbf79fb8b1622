"""Concrete manifolds and embeddings used by the experiments.

Family keys understood by :func:`parse_family` are ``circle{r}``,
``sphere{r}``, ``wavy{r1,r2,eps}``, ``hyp_sphere{n,r,rt}`` and
``double_wind{r1,delta}``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import bisect

from .dual import Dual
from .exceptions import ConfigError, ConstructionError
from .geometry import circle_chart, sphere_chart
from .jets import EmbeddingMap

N_MAX = 10 ** 6


def F_function(r1, r2, rt):
    """Hyperbolic distance between the parallel spheres of radii ``r1``, ``r2``.

    ``rt * (arcsinh(r2/rt) - arcsinh(r1/rt))``; vectorised over ``rt``.
    """
    r1, r2, rt = (np.asarray(v, dtype=float) for v in (r1, r2, rt))
    if np.any(r1 <= 0) or np.any(r2 <= 0) or np.any(rt <= 0):
        raise ConfigError("F_function needs positive arguments")
    out = rt * (np.arcsinh(r2 / rt) - np.arcsinh(r1 / rt))
    return float(out) if out.ndim == 0 else out


# families -----------------------------------------------------------------

@dataclass
class EmbeddingFamily:
    """A named, parametrised isometric embedding.

    ``shape_bounds`` lists the parameters an optimiser may vary, with closed
    bounds; every other parameter is fixed.
    """

    name: str
    params: dict
    builder: Callable[..., EmbeddingMap]
    shape_bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, (lo, hi) in self.shape_bounds.items():
            if key not in self.params:
                raise ConfigError(f"{self.name}: unknown shape parameter {key!r}")
            if not lo < hi or not lo <= self.params[key] <= hi:
                raise ConfigError(f"{self.name}: invalid bounds {lo, hi} for {key}={self.params[key]}")

    @cached_property
    def embedding(self) -> EmbeddingMap:
        return self.builder(**self.params)

    def with_params(self, **kw) -> "EmbeddingFamily":
        return EmbeddingFamily(self.name, {**self.params, **kw}, self.builder, dict(self.shape_bounds))

    @property
    def target_dim(self) -> int:
        return self.embedding.target_dim

    @property
    def spec(self) -> str:
        inner = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}{{{inner}}}"


def _circle_map(r: float, phase: float = 0.0) -> EmbeddingMap:
    def func(c):
        t = c[0] + phase
        return [r * np.cos(t), r * np.sin(t)]

    def derivs(p):
        t = p[:, 0] + phase
        c, s = np.cos(t), np.sin(t)
        f = r * np.stack([c, s], axis=1)
        d1 = r * np.stack([-s, c], axis=1)[:, :, None]
        d2 = r * np.stack([-c, -s], axis=1)[:, :, None, None]
        d3 = r * np.stack([s, -c], axis=1)[:, :, None, None, None]
        return [f, d1, d2, d3]

    return EmbeddingMap(circle_chart(r), 2, func, derivs=derivs, label=f"circle(r={r:g})")


def _sphere_map(r: float) -> EmbeddingMap:
    def func(c):
        phi, th = c
        sp = np.sin(phi)
        return [r * sp * np.cos(th), r * sp * np.sin(th), r * np.cos(phi)]

    def derivs(p):
        phi, th = p[:, 0], p[:, 1]
        sp, cp, st, ct = np.sin(phi), np.cos(phi), np.sin(th), np.cos(th)
        z = np.zeros_like(phi)
        f = r * np.stack([sp * ct, sp * st, cp], axis=1)
        d1 = r * np.stack(
            [np.stack([cp * ct, -sp * st], 1), np.stack([cp * st, sp * ct], 1), np.stack([-sp, z], 1)], axis=1
        )
        d2 = r * np.stack(
            [
                np.stack([np.stack([-sp * ct, -cp * st], 1), np.stack([-cp * st, -sp * ct], 1)], 1),
                np.stack([np.stack([-sp * st, cp * ct], 1), np.stack([cp * ct, -sp * st], 1)], 1),
                np.stack([np.stack([-cp, z], 1), np.stack([z, z], 1)], 1),
            ],
            axis=1,
        )
        return [f, d1, d2]

    return EmbeddingMap(sphere_chart(r), 3, func, derivs=derivs, label=f"sphere(r={r:g})")


def round_family(n: int, r: float, phase: float = None) -> EmbeddingFamily:
    """Totally umbilic embedding of ``S^n(r^-2)`` in ``E^{n+1}``, centred at 0.

    For ``n = 1`` a ``phase`` (rotation of the source circle) may be declared
    as an optimisable shape parameter by passing a value.
    """
    if r <= 0:
        raise ConfigError("radius must be positive")
    if n == 1:
        if phase is None:
            return EmbeddingFamily("circle", {"r": float(r)}, _circle_map)
        return EmbeddingFamily(
            "circle", {"r": float(r), "phase": float(phase)}, _circle_map, {"phase": (-np.pi, np.pi)}
        )
    if n == 2:
        return EmbeddingFamily("sphere", {"r": float(r)}, _sphere_map)
    raise ConfigError(f"round_family supports n in (1, 2), got {n}")


def hyperbolic_sphere_embedding(r: float, rt: float, n: int = 1) -> EmbeddingMap:
    """``x -> (sqrt(rt^2 + r^2), x)`` from ``S^n(r^-2)`` into ``H^{n+1}(-rt^-2)``."""
    if r <= 0 or rt <= 0:
        raise ConfigError("r and rt must be positive")
    inner = _circle_map(r) if n == 1 else _sphere_map(r) if n == 2 else None
    if inner is None:
        raise ConfigError(f"hyperbolic spheres support n in (1, 2), got {n}")
    height = float(np.sqrt(rt * rt + r * r))

    def func(c):
        return [height] + list(inner.func(c))

    return EmbeddingMap(
        inner.chart, n + 2, func, ambient="lorentz", label=f"hyp_sphere(n={n},r={r:g},rt={rt:g})"
    )


def hyp_sphere_family(n: int, r: float, rt: float) -> EmbeddingFamily:
    return EmbeddingFamily(
        "hyp_sphere", {"n": int(n), "r": float(r), "rt": float(rt)},
        lambda n, r, rt: hyperbolic_sphere_embedding(r, rt, n),
    )


# arc-length reparametrised closed curves ------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class ArcLengthCurve:
    """A closed curve ``c(t)``, ``t in [0, 2 pi)``, reparametrised by arc length.

    ``curve`` and ``speed`` must accept dual numbers.  The cumulative length is
    tabulated with 8-point Gauss-Legendre panels; the inverse ``s -> t`` starts
    from a monotone cubic interpolant of that table and is polished by Newton
    steps.  Derivatives of the inverse use ``dt/ds = 1/|c'(t)|``, so they are
    exact at every nesting depth.
    """

    def __init__(self, curve: Callable, speed: Callable, panels: int = 4096):
        self.curve = curve
        self.speed = speed
        self.panels = panels
        self.nodes = 2 * np.pi * np.arange(panels + 1) / panels
        h = self.nodes[1] - self.nodes[0]
        x = self.nodes[:-1, None] + 0.5 * h * (_GL_X[None, :] + 1.0)
        seg = 0.5 * h * (self.speed(x) @ _GL_W)
        self.cumulative = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.cumulative[-1])
        self._guess = PchipInterpolator(self.cumulative, self.nodes)

    def length_to(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        h = self.nodes[1] - self.nodes[0]
        j = np.clip(np.floor(t / h).astype(int), 0, self.panels - 1)
        a = self.nodes[j]
        x = a[..., None] + 0.5 * (t - a)[..., None] * (_GL_X + 1.0)
        return self.cumulative[j] + 0.5 * (t - a) * (self.speed(x) @ _GL_W)

    def _invert(self, s: np.ndarray) -> np.ndarray:
        s = np.mod(np.asarray(s, dtype=float), self.length)
        t = self._guess(s)
        for _ in range(8):
            delta = (self.length_to(t) - s) / self.speed(t)
            t = t - delta
            if np.max(np.abs(delta), initial=0.0) < 1e-15:
                break
        return t

    def parameter_at(self, s):
        """``t(s)``; accepts nested duals."""
        if isinstance(s, Dual):
            t = self.parameter_at(s.re)
            return Dual(t, s.du / self.speed(t))
        return self._invert(s)

    def embedding(self, label: str) -> EmbeddingMap:
        """Isometric embedding of the circle of length ``self.length``."""
        radius = self.length / (2 * np.pi)

        def func(c):
            return self.curve(self.parameter_at(radius * c[0]))

        dim = len(self.curve(np.zeros(1)))
        return EmbeddingMap(circle_chart(radius), dim, func, label=label)


def _wavy_curve(r1, a, N):
    def curve(t):
        rho = r1 + a * np.sin(N * t)
        return [rho * np.cos(t), rho * np.sin(t)]

    def speed(t):
        rho = r1 + a * np.sin(N * t)
        drho = a * N * np.cos(N * t)
        return np.sqrt(rho * rho + drho * drho)

    return curve, speed


def wavy_length(r1: float, a: float, N: int, points: int = 4096) -> float:
    """Length of ``rho = r1 + a sin(N theta)``.

    Substituting ``psi = N theta`` leaves a ``2 pi``-periodic integrand, so the
    trapezoid rule converges spectrally for any ``N``.
    """
    psi = 2 * np.pi * np.arange(points) / points
    return float(2 * np.pi * np.mean(np.sqrt((r1 + a * np.sin(psi)) ** 2 + (a * N * np.cos(psi)) ** 2)))


@dataclass
class WavyDesign:
    r1: float
    r2: float
    eps: float
    waves: int
    amplitude: float


def design_wavy(r1: float, r2: float, eps: float) -> WavyDesign:
    """Smallest wave count and matching amplitude giving length ``2 pi r2``."""
    if not (r1 > eps > 0) or r2 < r1:
        raise ConfigError("wavy circle needs r2 >= r1 > eps > 0")
    target = 2 * np.pi * r2
    if r2 == r1:
        return WavyDesign(r1, r2, eps, 1, 0.0)
    amax = 0.9 * eps
    reach = lambda N: wavy_length(r1, amax, N) >= target  # noqa: E731
    hi = 1
    while not reach(hi):
        if hi >= N_MAX:
            raise ConstructionError(f"no wave count up to {N_MAX} reaches length {target:.6g}")
        hi = min(2 * hi, N_MAX)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reach(mid):
            hi = mid
        else:
            lo = mid
    N = hi
    a = bisect(lambda a: wavy_length(r1, a, N) - target, 0.0, amax, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return WavyDesign(r1, r2, eps, N, float(a))


def build_wavy_circle(r1: float, r2: float, eps: float, panels: int = 4096) -> EmbeddingFamily:
    """``S^1(r2^-2)`` embedded in the ``eps``-annulus around the circle of radius ``r1``."""
    design = design_wavy(r1, r2, eps)

    def builder(r1, r2, eps):
        d = design_wavy(r1, r2, eps)
        curve, speed = _wavy_curve(d.r1, d.amplitude, d.waves)
        emb = ArcLengthCurve(curve, speed, panels=max(panels, 16 * d.waves)).embedding(
            f"wavy(r1={r1:g},r2={r2:g},eps={eps:g})"
        )
        return emb

    fam = EmbeddingFamily("wavy", {"r1": float(r1), "r2": float(r2), "eps": float(eps)}, builder)
    fam.design = design
    return fam


def _double_wind_curve(r1, tube):
    def curve(t):
        rho = r1 + tube * np.cos(t)
        return [rho * np.cos(2 * t), rho * np.sin(2 * t), tube * np.sin(t)]

    def speed(t):
        rho = r1 + tube * np.cos(t)
        return np.sqrt(4 * rho * rho + tube * tube)

    return curve, speed


def double_wind_curve(r1: float, delta: float, panels: int = 4096) -> EmbeddingFamily:
    """A toroidal helix circling the radius-``r1`` circle twice, inside a ``delta``-tube.

    The helix radius is ``0.9 * delta`` so the image stays strictly inside the
    tube.  The source circle has radius ``length / 2 pi``, slightly above ``2 r1``.
    """
    if not (0 < delta < r1):
        raise ConfigError("double wind needs 0 < delta < r1")

    def builder(r1, delta):
        curve, speed = _double_wind_curve(r1, 0.9 * delta)
        return ArcLengthCurve(curve, speed, panels=panels).embedding(f"double_wind(r1={r1:g},delta={delta:g})")

    return EmbeddingFamily("double_wind", {"r1": float(r1), "delta": float(delta)}, builder)


# spec strings ---------------------------------------------------------------

_FAMILIES = {
    "circle": (lambda r: round_family(1, r), {"r"}),
    "sphere": (lambda r: round_family(2, r), {"r"}),
    "wavy": (build_wavy_circle, {"r1", "r2", "eps"}),
    "hyp_sphere": (lambda n, r, rt: hyp_sphere_family(int(n), r, rt), {"n", "r", "rt"}),
    "double_wind": (double_wind_curve, {"r1", "delta"}),
}

_SPEC = re.compile(r"^\s*([A-Za-z_]\w*)\s*\{(.*)\}\s*$")


def parse_family(spec: str) -> EmbeddingFamily:
    """Build a family from a string such as ``wavy{r1=1,r2=1.1,eps=0.05}``."""
    m = _SPEC.match(spec)
    if not m:
        raise ConfigError(f"malformed family spec {spec!r}")
    key, body = m.groups()
    if key not in _FAMILIES:
        raise ConfigError(f"unknown family key {key!r}")
    builder, required = _FAMILIES[key]
    params = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{key}: expected name=value, got {item!r}")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"{key}: parameter {name.strip()!r} is not a number") from None
    if set(params) != required:
        raise ConfigError(f"{key}: expected parameters {sorted(required)}, got {sorted(params)}")
    return builder(**params)
