"""Lifted Gromov-Hausdorff distances between isometrically embedded manifolds.

Embeddings are lifted to iterated unit tangent bundles through their jets,
and the lifted images are compared by Hausdorff distance up to rigid motion.
"""
import importlib

__version__ = "0.1.0"

# submodules load on first attribute access so the CLI starts quickly
_LAZY = {
    "ConfigError": "exceptions",
    "ConstructionError": "exceptions",
    "ConvergenceReport": "hamilton",
    "DghConfig": "alignment",
    "DghEstimate": "alignment",
    "DghEstimator": "alignment",
    "DomainError": "exceptions",
    "EmbeddingMap": "jets",
    "F_function": "scenarios",
    "JetLift": "jets",
    "LiftedCloud": "jets",
    "MetricChart": "geometry",
    "NumericError": "exceptions",
    "PointCloud": "hausdorff",
    "RigidMotion": "alignment",
    "SampleCounts": "jets",
    "SasakiGHError": "exceptions",
    "TensorField02": "hamilton",
    "build_wavy_circle": "scenarios",
    "circle_chart": "geometry",
    "ck_norm": "hamilton",
    "double_wind_curve": "scenarios",
    "equivalence_experiment": "hamilton",
    "estimate_dgh": "alignment",
    "flat_chart": "geometry",
    "hamilton_converges": "hamilton",
    "hausdorff": "hausdorff",
    "hyperbolic_distance": "geometry",
    "lift_cloud": "jets",
    "lifted_hausdorff": "alignment",
    "parse_family": "scenarios",
    "pullback_metric": "hamilton",
    "round_family": "scenarios",
    "sphere_chart": "geometry",
    "unit_bundle_sample": "jets",
}

__all__ = sorted(_LAZY)


def __getattr__(name):
    if name in _LAZY:
        return getattr(importlib.import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_LAZY))
