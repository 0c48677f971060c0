"""Run configuration: JSON schema, presets, overrides and default expansion.

A run config has the blocks ``kernel``, ``mesh``, ``solver`` and
``experiment`` plus ``seed``, ``workers`` and ``output_dir``.  The
``experiment`` block holds one sub-block per command.  Unknown keys are
rejected at every level.

Resolution order (later wins): built-in defaults, preset, config file,
``--set`` overrides, explicit ``--seed`` / ``--out`` flags.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field

import jsonschema

from .exceptions import ConfigError
from .experiments import DEFAULT_LADDER, MESH_DEFAULTS, resolve_kernel
from .solver import SolverConfig

COMMANDS = ("kernel-check", "norms", "solve", "kato", "boundary", "sweep", "stability", "verify")
SUITES = ("operator", "envelope", "martin", "duality", "kato", "solver", "marcinkiewicz")
OUTPUT_ENV = "NLGREEN_OUTPUT_DIR"
DEFAULT_OUTPUT = "nlgreen_out"
SEED_MAX = 2 ** 64 - 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_NUMS = {"type": "array", "items": _NUM}
_POINT = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2}]}


def _obj(props: dict, **kw) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, **kw}


_NONLIN = _obj({"kind": {"enum": ["power", "linear", "table", "saturating"]}, "p": _NUM,
                "t": _NUMS, "g": _NUMS, "a": _POS, "b": _POS})
_MEASURE = _obj({"atoms": {"type": "array", "items": _obj({"x": _POINT, "w": _NUM}, required=["x"])},
                 "density": {"type": ["string", "array", "null"], "items": _NUM}})

EXPERIMENT_SCHEMA = {
    "kernel-check": _obj({"n_pairs": _INT1, "hs": _NUMS, "n_sv": _INT1, "compactness": {"type": "boolean"}}),
    "norms": _obj({"qs": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}}}),
    "solve": _obj({"nonlinearity": _NONLIN, "measure": {"oneOf": [_MEASURE, {"type": "null"}]},
                   "method": {"enum": ["picard", "monotone"]}, "gate": {"type": "boolean"}}),
    "kato": _obj({"tol": _POS, "ks": _NUMS}),
    "boundary": _obj({"p": _NUM, "z": {"oneOf": [_POINT, {"type": "null"}]}, "n_steps": _INT1,
                      "ray": _NUMS, "resolution": {"oneOf": [_INT1, {"type": "null"}]}, "d_max": _POS, "d_min": _POS,
                      "compare_p": {"type": ["number", "null"]}, "audit_points": _INT1}),
    "sweep": _obj({"ps": _NUMS, "ladder": {"type": "array", "items": {"type": "array", "items": _NUM,
                                                                       "minItems": 2, "maxItems": 2}},
                   "grading": {"type": "number", "minimum": 1}, "fixed_depth": _POS,
                   "bounded_g": {"oneOf": [_NONLIN, {"type": "null"}]}}),
    "stability": _obj({"z0": {"oneOf": [_POINT, {"type": "null"}]}, "scales": _NUMS, "floor_cells": _POS,
                       "resolution": {"oneOf": [_INT1, {"type": "null"}]},
                       "weight": _NUM}),
    "verify": _obj({"suites": {"type": "array", "items": {"enum": list(SUITES)}}, "kato_tol": _POS}),
}

SCHEMA = _obj({
    "command": {"enum": list(COMMANDS)},
    "kernel": _obj({"kernel": {"enum": ["rfl", "sfl", "cfl", "envelope"]}, "N": {"enum": [1, 2]},
                    "s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "gamma": {"type": ["number", "null"]}, "R": _POS, "c0": _POS,
                    "K": {"oneOf": [_INT1, {"type": "null"}]}}),
    "mesh": _obj({"resolution": {"type": "integer", "minimum": 2}, "grading": {"type": "number", "minimum": 1}}),
    "solver": _obj({"tol": _POS, "max_iter": _INT1, "damping": {"type": "number", "exclusiveMinimum": 0,
                                                                "maximum": 1}, "min_damping": _POS}),
    "experiment": _obj(EXPERIMENT_SCHEMA),
    "seed": {"type": "integer", "minimum": 0, "maximum": SEED_MAX},
    "workers": _INT1,
    "output_dir": {"type": "string"},
})

PRESETS = {
    "rfl-interval-s025": {"kernel": {"kernel": "rfl", "N": 1, "s": 0.25}, "mesh": {"resolution": 256, "grading": 2.0}},
    "sfl-interval-s025": {"kernel": {"kernel": "sfl", "N": 1, "s": 0.25}, "mesh": {"resolution": 256, "grading": 2.0}},
    "rfl-disk-s05": {"kernel": {"kernel": "rfl", "N": 2, "s": 0.5}, "mesh": {"resolution": 18, "grading": 1.5}},
    "cfl-disk-s075": {"kernel": {"kernel": "cfl", "N": 2, "s": 0.75}, "mesh": {"resolution": 18, "grading": 1.5}},
}
#: Accepted preset names that map to another preset, with the reason shown on stderr.
PRESET_ALIASES = {
    "cfl-interval-s075": ("cfl-disk-s075", "the censored kernel needs N > 2s, so s = 0.75 runs on the disk"),
}


def _first_axis(N: int, value: float) -> list:
    return [value] + [0.0] * (N - 1)


def experiment_defaults(command: str, kernel: dict) -> dict:
    """Expanded defaults of one experiment sub-block (depends on the kernel block)."""
    N, R = int(kernel["N"]), float(kernel["R"])
    if command == "kernel-check":
        return {"n_pairs": 10_000, "hs": [0.2, 0.1, 0.05, 0.025], "n_sv": 20, "compactness": True}
    if command == "norms":
        return {"qs": [1.5, 2.0, 3.0]}
    if command == "solve":
        return {"nonlinearity": {"kind": "power", "p": 1.25},
                "measure": {"atoms": [{"x": _first_axis(N, 0.3011 * R), "w": 1.0}], "density": None},
                "method": "picard", "gate": True}
    if command == "kato":
        return {"tol": 1e-8, "ks": [1, 2, 4, 8]}
    if command == "boundary":
        # the interval runs on a finer mesh than its preset; null keeps the mesh block
        return {"p": 1.3, "z": _first_axis(N, R), "n_steps": 6, "ray": [0.2, 0.1, 0.05],
                "resolution": 512 if N == 1 else None,
                "d_max": 0.2, "d_min": 1e-4, "compare_p": None, "audit_points": 6}
    if command == "sweep":
        ladder = [list(x) for x in DEFAULT_LADDER] if N == 1 else [[12, 0.25], [24, 0.02], [48, 1.5e-3]]
        return {"ps": [1.3, 2.0], "ladder": ladder, "grading": 3.0, "fixed_depth": 0.25,
                "bounded_g": {"kind": "saturating", "a": 1.0, "b": 1.0}}
    if command == "stability":
        # a disk bump one cell wide already covers several nodes; the disk mesh is refined a little
        return {"z0": _first_axis(N, 0.3011 * R), "scales": [0.4 * 0.5 ** k for k in range(8)],
                "floor_cells": 4.0 if N == 1 else 1.0, "resolution": None if N == 1 else 24, "weight": 1.0}
    if command == "verify":
        return {"suites": list(SUITES), "kato_tol": 1e-8}
    raise ConfigError(f"unknown command {command!r}")


@dataclass
class RunConfig:
    """Fully resolved run configuration.

    ``output_dir`` is kept out of :meth:`resolved` so that the config hash
    does not depend on where the files land.
    """

    command: str
    kernel: dict
    mesh: dict
    solver: dict
    experiment: dict
    seed: int = 0
    workers: int = 1
    output_dir: str = DEFAULT_OUTPUT
    notes: list = field(default_factory=list)

    def resolved(self) -> dict:
        return {"command": self.command, "kernel": self.kernel, "mesh": self.mesh, "solver": self.solver,
                "experiment": {self.command: self.experiment}, "seed": self.seed, "workers": self.workers}


def validate(cfg: dict, source: str = "config") -> None:
    """Schema validation; raises :class:`ConfigError` with the offending path."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None


def load_json(path: str) -> dict:
    """Read a JSON config file.

    Raises
    ------
    ConfigError
        Missing or unreadable file, or malformed JSON (message carries
        ``line`` and ``column``).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value``; ``value`` is parsed as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key.path=value")
    key, raw = text.split("=", 1)
    path = [k for k in key.strip().split(".") if k]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(cfg: dict, path: list[str], value) -> None:
    node = cfg
    for k in path[:-1]:
        nxt = node.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override path {'.'.join(path)} crosses a non-object value")
        node = nxt
    node[path[-1]] = value


def resolve_preset(name: str, notes: list | None = None) -> dict:
    if name in PRESET_ALIASES:
        target, why = PRESET_ALIASES[name]
        if notes is not None:
            notes.append(f"preset {name} runs as {target}: {why}")
        name = target
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(PRESET_ALIASES)}")
    return copy.deepcopy(PRESETS[name])


def build_config(command: str, *, preset: str | None = None, path: str | None = None,
                 overrides=(), seed: int | None = None, out: str | None = None) -> RunConfig:
    """Merge all sources, validate, and expand defaults."""
    notes: list = []
    cfg: dict = {}
    if preset:
        cfg = deep_merge(cfg, resolve_preset(preset, notes))
    if path:
        data = load_json(path)
        validate(data, path)
        cfg = deep_merge(cfg, data)
    for text in overrides:
        set_path(cfg, *parse_override(text))
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["output_dir"] = out
    validate(cfg, "merged config")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for command {cfg['command']!r}, not {command!r}")

    kernel = resolve_kernel(cfg.get("kernel"))
    N, s, gamma = int(kernel["N"]), float(kernel["s"]), float(kernel["gamma"])
    if not N > 2 * s:
        raise ConfigError(f"N = {N} must exceed 2s = {2 * s:g}")
    if kernel["kernel"] == "sfl" and N != 1:
        raise ConfigError("the spectral kernel is implemented on the interval (N = 1) only")
    if kernel["kernel"] in ("cfl",) and not s > 0.5:
        raise ConfigError("the censored kernel needs s > 1/2")
    if not gamma >= 0:
        raise ConfigError(f"gamma must be nonnegative, got {gamma}")
    mesh = {**MESH_DEFAULTS, **cfg.get("mesh", {})}
    try:
        solver = SolverConfig.from_dict(cfg.get("solver")).to_dict()
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    # shallow: a user-supplied measure or nonlinearity replaces the default whole
    exp = {**experiment_defaults(command, kernel), **copy.deepcopy(cfg.get("experiment", {}).get(command, {}))}
    output_dir = cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    return RunConfig(command, kernel, mesh, solver, exp, int(cfg.get("seed", 0)), int(cfg.get("workers", 1)),
                     output_dir, notes)
