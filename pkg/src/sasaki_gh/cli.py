"""Command-line runner: ``sasaki-gh <subcommand> [family specs] [key=value ...]``.

Parameters are ``key=value`` tokens; bare family specs such as ``circle{r=1}``
fill the family slots in order, and bare words are boolean flags (``log``).
``--config FILE`` reads the same keys from a flat ``key=value`` file; tokens
on the command line win.  ``SASAKI_GH_THREADS`` overrides ``threads``.

Tables go out as CSV (one ``# config`` comment line, then a header), single
results as JSON.  Exit codes: 0 ok, 2 configuration, 3 construction,
4 numeric failure, 5 I/O.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigError, ConstructionError, DomainError, NumericError

__all__ = ["RunConfig", "main", "main_exit", "run_scenario", "EXIT_CODES"]

log = logging.getLogger(__name__)

EXIT_CODES = {"ok": 0, "config": 2, "construction": 3, "numeric": 4, "io": 5}
THREADS_ENV = "SASAKI_GH_THREADS"


@dataclass(frozen=True)
class _Key:
    kind: Callable
    default: object
    check: Callable = lambda v: True
    bounds: str = ""


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _range(text):
    lo, sep, hi = str(text).partition("..")
    if not sep:
        v = float(lo)
        return (v, v)
    return (float(lo), float(hi))


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


_pos = lambda v: v > 0  # noqa: E731
_nonneg = lambda v: v >= 0  # noqa: E731

KEYS = {
    "order": _Key(int, 2, lambda v: 0 <= v <= 3, "0 <= order <= 3"),
    "R": _Key(float, 1.0, _pos, "> 0"),
    "base": _Key(int, 128, _pos, "> 0"),
    "radii": _Key(int, 2, _pos, "> 0"),
    "fiber_dirs": _Key(int, 4, _pos, "> 0"),
    "top_dirs": _Key(int, 12, _pos, "> 0"),
    "restarts": _Key(int, 8, _pos, "> 0"),
    "max_iter": _Key(int, 500, _pos, "> 0"),
    "tol": _Key(float, 1e-6, _pos, "> 0"),
    "seed": _Key(int, 0, _nonneg, ">= 0"),
    "threads": _Key(int, 1, lambda v: v >= 1 or v == -1, ">= 1 or -1"),
    "out": _Key(str, "-"),
    # hausdorff
    "metric": _Key(str, "euclidean", lambda v: v in ("euclidean", "hyperbolic"), "euclidean|hyperbolic"),
    "rt": _Key(_range, (1.0, 1.0), lambda v: v[0] > 0 and v[1] >= v[0], "0 < lo <= hi"),
    # ftable
    "r1": _Key(float, 1.0, _pos, "> 0"),
    "r2": _Key(float, 2.0, _pos, "> 0"),
    "count": _Key(int, 101, lambda v: v >= 1, ">= 1"),
    "log": _Key(_bool, False),
    # wavy-sweep
    "eps": _Key(_floats, (0.05, 0.02, 0.01), lambda v: len(v) > 0 and all(x > 0 for x in v), "positive list"),
    "image_base": _Key(int, 8192, _pos, "> 0"),
    # equivalence
    "r": _Key(float, 1.0, _pos, "> 0"),
    "n": _Key(int, 1, lambda v: v in (1, 2), "1 or 2"),
    "sequence": _Key(str, "harmonic", lambda v: v in ("harmonic", "constant", "list"), "harmonic|constant|list"),
    "terms": _Key(int, 8, lambda v: v >= 0, ">= 0"),
    "value": _Key(float, 2.0, _pos, "> 0"),
    "radii_list": _Key(_floats, (), lambda v: all(x > 0 for x in v), "positive list"),
    "grid": _Key(int, 512, _pos, "> 0"),
}

# keys each subcommand accepts, besides the shared ones
_SHARED = ("out", "threads", "seed")
_ESTIMATION = ("order", "R", "base", "radii", "fiber_dirs", "top_dirs", "restarts", "max_iter", "tol")
_ACCEPTS = {
    "hausdorff": ("metric", "rt"),
    "dgh": _ESTIMATION,
    "lift": ("order", "R", "base", "radii", "fiber_dirs", "top_dirs"),
    "ftable": ("r1", "r2", "rt", "count", "log"),
    "wavy-sweep": _ESTIMATION + ("r1", "r2", "eps", "image_base"),
    "equivalence": _ESTIMATION + ("r", "n", "sequence", "terms", "value", "radii_list", "grid"),
}
# per-command defaults that differ from KEYS
_DEFAULTS = {"wavy-sweep": {"r2": 1.1}}
_SLOTS = {"hausdorff": ("a", "b"), "dgh": ("family_a", "family_b"), "lift": ("family",)}


@dataclass
class RunConfig:
    """A validated run: subcommand, positional slots and typed parameters."""

    command: str
    slots: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        if key in self.params:
            return self.params[key]
        return _DEFAULTS.get(self.command, {}).get(key, KEYS[key].default)

    def counts(self):
        from .jets import SampleCounts

        return SampleCounts(self["base"], self["radii"], self["fiber_dirs"], self["top_dirs"])

    def dgh_config(self):
        from .alignment import DghConfig

        return DghConfig(
            fiber_cap=self["R"],
            counts=self.counts(),
            restarts=self["restarts"],
            max_iter=self["max_iter"],
            tol=self["tol"],
            seed=self["seed"],
            n_jobs=self["threads"],
        )

    def describe(self) -> str:
        """One line recording every slot and every parameter (defaults included)."""
        items = [f"command={self.command}"]
        items += [f"{k}={v}" for k, v in self.slots.items()]
        for key in sorted(_SHARED + _ACCEPTS[self.command]):
            if key in ("out", "threads"):
                continue
            v = self[key]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v) if key != "rt" else f"{v[0]!r}..{v[1]!r}"
            items.append(f"{key}={v}")
        return " ".join(items)


def _set(params: dict, key: str, raw, where: str) -> None:
    spec = KEYS.get(key)
    if spec is None:
        raise ConfigError(f"{where}: unknown parameter {key!r}")
    try:
        value = spec.kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: parameter {key!r} has invalid value {raw!r}") from None
    if not spec.check(value):
        raise ConfigError(f"{where}: parameter {key!r}={raw!r} out of bounds ({spec.bounds})")
    params[key] = value


def read_config_file(path: str) -> list:
    """``(key, value, 'file:line')`` triples from a flat key=value file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    out = []
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected key=value, got {line!r}")
        out.append((key.strip(), value.strip(), f"{path}:{no}"))
    return out


def build_config(command: str, tokens: list, config_path: Optional[str] = None, env=None) -> RunConfig:
    """Merge config file, command-line tokens and environment into a RunConfig."""
    env = os.environ if env is None else env
    if command not in _ACCEPTS:
        raise ConfigError(f"unknown subcommand {command!r}")
    allowed = set(_SHARED + _ACCEPTS[command])
    slots_order = _SLOTS.get(command, ())
    entries = read_config_file(config_path) if config_path else []
    positional = []
    for tok in tokens:
        key = tok.partition("=")[0]
        if "=" not in tok and command == "hausdorff" or "{" in tok and key not in KEYS and key not in slots_order:
            positional.append(tok)
        elif "=" in tok:
            key, _, value = tok.partition("=")
            entries.append((key, value, "argument"))
        else:
            entries.append((tok, "true", "argument"))
    cfg = RunConfig(command)
    for key, value, where in entries:
        if key in slots_order:
            cfg.slots[key] = value
            continue
        if key not in allowed:
            if key in KEYS:
                raise ConfigError(f"{where}: parameter {key!r} does not apply to {command}")
            raise ConfigError(f"{where}: unknown parameter {key!r}")
        _set(cfg.params, key, value, where)
    free = [s for s in slots_order if s not in cfg.slots]
    if len(positional) > len(free):
        raise ConfigError(f"{command}: too many positional arguments {positional[len(free):]}")
    cfg.slots.update(zip(free, positional))
    missing = [s for s in slots_order if s not in cfg.slots]
    if missing:
        raise ConfigError(f"{command}: missing {', '.join(missing)}")
    if env.get(THREADS_ENV):
        _set(cfg.params, "threads", env[THREADS_ENV], THREADS_ENV)
    return cfg


# emitters ------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(cfg: RunConfig, header: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# {cfg.describe()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str, stdout) -> None:
    if cfg["out"] == "-":
        stdout.write(text)
        return
    with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _family(spec: str):
    from .scenarios import parse_family

    return parse_family(spec)


def _load_cloud(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                if rows:
                    raise ConfigError(f"{path}:{no}: non-numeric row") from None
                continue  # header
    if not rows:
        raise ConfigError(f"{path}: no points")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: rows have different lengths")
    return np.array(rows)


# subcommands ---------------------------------------------------------------

def _cmd_hausdorff(cfg, stdout):
    from .geometry import check_on_hyperboloid
    from .hausdorff import PointCloud, hausdorff

    A, B = _load_cloud(cfg.slots["a"]), _load_cloud(cfg.slots["b"])
    rt = None
    if cfg["metric"] == "hyperbolic":
        rt = cfg["rt"][0]
        check_on_hyperboloid(A, rt)
        check_on_hyperboloid(B, rt)
    value = hausdorff(PointCloud(A, cfg["metric"], rt), PointCloud(B, cfg["metric"], rt))
    _emit(cfg, f"{value!r}\n", stdout)


def _cmd_dgh(cfg, stdout):
    from .alignment import estimate_dgh

    famA, famB = _family(cfg.slots["family_a"]), _family(cfg.slots["family_b"])
    est = estimate_dgh(famA, famB, cfg["order"], cfg.dgh_config())
    payload = {"config": cfg.describe(), **est.to_dict()}
    _emit(cfg, json.dumps(payload, indent=2, sort_keys=True) + "\n", stdout)


def _cmd_lift(cfg, stdout):
    from .alignment import lift_family
    from .jets import column_names

    fam = _family(cfg.slots["family"])
    cloud = lift_family(fam, cfg["order"], cfg.dgh_config())
    rows = cloud.points.tolist()
    _emit(cfg, _csv_text(cfg, column_names(cloud.order, cloud.m), rows), stdout)


def _cmd_ftable(cfg, stdout):
    from .scenarios import F_function

    lo, hi = cfg["rt"]
    count = cfg["count"] if hi > lo else 1
    grid = np.geomspace(lo, hi, count) if cfg["log"] else np.linspace(lo, hi, count)
    F = F_function(cfg["r1"], cfg["r2"], grid)
    rows = [[float(t), float(f)] for t, f in zip(grid, np.atleast_1d(F))]
    _emit(cfg, _csv_text(cfg, ["rt", "F"], rows), stdout)


def _cmd_wavy_sweep(cfg, stdout):
    from .alignment import DghConfig, lifted_hausdorff
    from .jets import SampleCounts
    from .scenarios import design_wavy, round_family

    dcfg = cfg.dgh_config()
    image_cfg = DghConfig(counts=SampleCounts(base=cfg["image_base"]), seed=cfg["seed"])
    circle = round_family(1, cfg["r1"])
    rows = []
    for eps in cfg["eps"]:
        design = design_wavy(cfg["r1"], cfg["r2"], eps)
        wavy = _family(f"wavy{{r1={cfg['r1']!r},r2={cfg['r2']!r},eps={eps!r}}}")
        h0 = lifted_hausdorff(wavy, circle, 0, image_cfg)
        hk = lifted_hausdorff(wavy, circle, cfg["order"], dcfg)
        rows.append([eps, design.waves, design.amplitude, h0, hk])
    header = ["eps", "waves", "amplitude", "image_hausdorff", "lifted_hausdorff"]
    _emit(cfg, _csv_text(cfg, header, rows), stdout)


def _equivalence_radii(cfg) -> list:
    if cfg["sequence"] == "list":
        return list(cfg["radii_list"])
    if cfg["sequence"] == "constant":
        return [cfg["value"]] * cfg["terms"]
    return [cfg["r"] + 1.0 / i for i in range(1, cfg["terms"] + 1)]


def _cmd_equivalence(cfg, stdout):
    from .hamilton import equivalence_experiment

    if cfg["order"] < 1:
        raise ConfigError("equivalence needs order >= 1")
    report = equivalence_experiment(
        _equivalence_radii(cfg), cfg["r"], cfg["order"], cfg.dgh_config(), cfg["n"], cfg["grid"],
    )
    rows = [[rec.i, rec.radius, rec.dgh, rec.ck, round(rec.runtime_ms, 3)] for rec in report.records]
    header = ["i", "r_i", "dgh_estimate", "ck_norm", "runtime_ms"]
    _emit(cfg, _csv_text(cfg, header, rows), stdout)


_COMMANDS = {
    "hausdorff": _cmd_hausdorff,
    "dgh": _cmd_dgh,
    "lift": _cmd_lift,
    "ftable": _cmd_ftable,
    "wavy-sweep": _cmd_wavy_sweep,
    "equivalence": _cmd_equivalence,
}


def run_scenario(cfg: RunConfig, stdout=None) -> int:
    _COMMANDS[cfg.command](cfg, stdout or sys.stdout)
    return EXIT_CODES["ok"]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sasaki-gh",
        description="Lifted Gromov-Hausdorff distances, counterexamples and convergence experiments.",
        epilog="Parameters are key=value tokens, e.g. `sasaki-gh dgh circle{r=1} circle{r=1.5} order=2 seed=7`.",
    )
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("tokens", nargs="*", help="family specs, key=value parameters and flags")
    p.add_argument("--config", help="flat key=value file; command-line tokens override it")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    args = _parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr)
    try:
        cfg = build_config(args.command, args.tokens, args.config)
        return run_scenario(cfg, stdout)
    except ConfigError as exc:
        stderr.write(f"sasaki-gh: configuration error: {exc}\n")
        return EXIT_CODES["config"]
    except ConstructionError as exc:
        stderr.write(f"sasaki-gh: construction failed: {exc}\n")
        return EXIT_CODES["construction"]
    except (NumericError, DomainError, FloatingPointError) as exc:
        stderr.write(f"sasaki-gh: numeric failure: {exc}\n")
        return EXIT_CODES["numeric"]
    except OSError as exc:
        stderr.write(f"sasaki-gh: I/O error: {exc}\n")
        return EXIT_CODES["io"]


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
