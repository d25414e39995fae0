"""Run configuration files and named presets.

A config file is YAML with an explicit ``schema_version``.  Unknown keys and
invalid values are reported with the line they appear on.
"""

from __future__ import annotations

import os
from dataclasses import replace
from typing import Any

import yaml

from .ensemble import EnsembleConfig
from .model import BATH_MODES, DriveProtocol, GaussianParams, QubitState, SimulationConfig, uniform_sample_times

SCHEMA_VERSION = 1
ENV_PREFIX = "QJCAL_"

DEFAULT_DRIVE = dict(amplitude=0.05, segment_periods=50, segment_mask=[True, False, True, False],
                   total_steps=200_000)

_SCHEMA: dict[str, Any] = {
    "schema_version": int,
    "run": {"trajectories": int, "seed": int},
    "bath": {
        "mode": str, "n": int, "beta": float, "gamma": float, "total_coupling": float,
        "gaussian": {"heat_capacity": float, "g2": float, "statistic": str, "E0": float},
    },
    "drive": {"amplitude": float, "segment_periods": int, "segment_mask": list, "total_steps": int},
    "sampling": {"count": int, "times": list},
    "initial": {"qubit": object, "k": int},
    "measurement": str,
    "reverse_beta": float,
}


class ConfigError(ValueError):
    pass


def _preset(mode: str, n: int, mask=None, trajectories: int = 100_000, **bath) -> dict:
    drive = dict(DEFAULT_DRIVE)
    if mask is not None:
        drive["segment_mask"] = mask
    return {
        "schema_version": SCHEMA_VERSION,
        "run": {"trajectories": trajectories, "seed": 2015},
        "bath": {"mode": mode, "n": n, "beta": 1.0, **bath},
        "drive": drive,
        "sampling": {"count": 400},
    }


PRESETS: dict[str, dict] = {
    "paper-n5": _preset("macro", 5),
    "paper-n20": _preset("macro", 20),
    "paper-n100": _preset("macro", 100),
    "paper-n400": _preset("macro", 400),
    "paper-ideal": _preset("ideal", 400),
    "undriven": _preset("macro", 5, mask=[False, False, False, False]),
    "gaussian-demo": _preset("gaussian", 5, gaussian={"heat_capacity": 10.0, "g2": 0.5,
                                                      "statistic": "fermion"}),
}
PRESETS["ideal"] = PRESETS["paper-ideal"]


# ---------------------------------------------------------------- parsing


def _line(node) -> int:
    return node.start_mark.line + 1


def _check_keys(node, schema: dict, where: str) -> None:
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"line {_line(node)}: {where or 'document'} must be a mapping")
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in schema:
            raise ConfigError(f"line {_line(key_node)}: unknown key {where + key!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            _check_keys(value_node, sub, f"{where}{key}.")


def _value_lines(node, prefix: str = "") -> dict[str, int]:
    out: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + k.value
            out[path] = _line(k)
            out.update(_value_lines(v, path + "."))
    return out


def parse_config_text(text: str) -> tuple[dict, dict[str, int]]:
    """Parse YAML text into a plain dict plus a map from dotted key to line number."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if node is None:
        raise ConfigError("empty configuration")
    _check_keys(node, _SCHEMA, "")
    data = yaml.safe_load(text)
    lines = _value_lines(node)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        where = f"line {lines['schema_version']}: " if "schema_version" in lines else ""
        raise ConfigError(f"{where}schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return data, lines


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def build_config(data: dict, lines: dict[str, int] | None = None) -> EnsembleConfig:
    """Turn a parsed document into an :class:`EnsembleConfig`, validating every field."""
    lines = lines or {}

    def fail(key: str, msg: str):
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigError(f"{where}{key}: {msg}")

    def get(path: str, default=None, kind=None):
        cur: Any = data
        for part in path.split("."):
            if not isinstance(cur, dict) or part not in cur:
                return default
            cur = cur[part]
        if cur is None:
            return default
        if kind is float and isinstance(cur, (int, float)) and not isinstance(cur, bool):
            return float(cur)
        if kind is int and isinstance(cur, int) and not isinstance(cur, bool):
            return cur
        if kind in (float, int):
            fail(path, f"expected a number, got {cur!r}")
        return cur

    mode = get("bath.mode", "macro")
    n = get("bath.n", 5, int)
    beta = get("bath.beta", 1.0, float)
    total = get("bath.total_coupling", 0.025, float)
    gamma = get("bath.gamma", None, float)
    if n < 1:
        fail("bath.n", "must be >= 1")
    if gamma is None:
        gamma = total / n
    g = get("bath.gaussian", {}) or {}
    mask = get("drive.segment_mask", DEFAULT_DRIVE["segment_mask"])
    if not isinstance(mask, list) or not all(isinstance(m, bool) for m in mask):
        fail("drive.segment_mask", "must be a list of booleans")
    try:
        proto = DriveProtocol(
            get("drive.amplitude", DEFAULT_DRIVE["amplitude"], float),
            get("drive.segment_periods", DEFAULT_DRIVE["segment_periods"], int),
            tuple(mask),
            get("drive.total_steps", DEFAULT_DRIVE["total_steps"], int),
        )
    except ValueError as exc:
        fail("drive", str(exc))
    times = get("sampling.times")
    if times is None:
        times = uniform_sample_times(proto, get("sampling.count", 400, int))
    qubit = get("initial.qubit", "canonical")
    if isinstance(qubit, dict):
        try:
            qubit = QubitState(complex(*qubit["c0"]), complex(*qubit["c1"])).normalized()
        except (KeyError, TypeError, ValueError):
            fail("initial.qubit", "expects {c0: [re, im], c1: [re, im]}")
    checks = [
        ("bath.mode", mode in BATH_MODES, f"must be one of {', '.join(BATH_MODES)}"),
        ("bath.beta", beta > 0, "must be positive"),
        ("bath.gamma" if get("bath.gamma") is not None else "bath.total_coupling", gamma > 0,
         "must be positive"),
        ("bath.gaussian.heat_capacity", float(g.get("heat_capacity", 1.0)) > 0, "must be positive"),
        ("bath.gaussian.statistic", g.get("statistic", "boson") in ("boson", "fermion"),
         "must be boson or fermion"),
        ("measurement", get("measurement", "projective") in ("projective", "calorimetric"),
         "must be projective or calorimetric"),
    ]
    for key, ok, msg in checks:
        if not ok:
            fail(key, msg)
    try:
        gp = GaussianParams(
            heat_capacity=float(g.get("heat_capacity", 100.0)),
            g2=float(g.get("g2", 0.025)),
            statistic=g.get("statistic", "boson"),
            E0=None if g.get("E0") is None else float(g["E0"]),
        )
    except (TypeError, ValueError) as exc:
        fail("bath.gaussian", str(exc))
    try:
        sim = SimulationConfig(
            bath_mode=mode, n=n, beta=beta, gamma=gamma, protocol=proto,
            sample_times=tuple(times), gaussian=gp, initial_qubit=qubit,
            initial_k=get("initial.k", None, int), reverse_beta=get("reverse_beta", None, float),
            measurement=get("measurement", "projective"),
        )
    except ValueError as exc:
        key = "sampling.times" if "sample_times" in str(exc) else (
            "initial" if "initial" in str(exc) else "reverse_beta" if "reverse_beta" in str(exc) else "bath")
        fail(key, str(exc))
    trajectories = get("run.trajectories", 100_000, int)
    seed = get("run.seed", 2015, int)
    try:
        return EnsembleConfig(sim, trajectories, seed)
    except ValueError as exc:
        fail("run", str(exc))


def load_config(path: str | None = None, preset: str | None = None) -> tuple[dict, dict[str, int]]:
    """Read a config file and/or a preset; the file's entries override the preset."""
    if path is None and preset is None:
        preset = "paper-n5"
    data: dict = {}
    lines: dict[str, int] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(sorted(PRESETS))}")
        data = PRESETS[preset]
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        parsed, lines = parse_config_text(text)
        data = _merge(data, parsed)
    return data, lines


def apply_overrides(data: dict, *, trajectories=None, seed=None, mode=None, environ=None) -> dict:
    """Command-line values win over ``QJCAL_*`` environment variables, which win over the file."""
    env = os.environ if environ is None else environ
    run = dict(data.get("run", {}) or {})
    bath = dict(data.get("bath", {}) or {})

    def pick(flag, name, cast):
        if flag is not None:
            return flag
        raw = env.get(ENV_PREFIX + name)
        if raw is None:
            return None
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"environment variable {ENV_PREFIX + name}={raw!r} is invalid") from None

    t = pick(trajectories, "TRAJECTORIES", int)
    s = pick(seed, "SEED", int)
    m = pick(mode, "MODE", str)
    if t is not None:
        run["trajectories"] = t
    if s is not None:
        run["seed"] = s
    if m is not None:
        bath["mode"] = m
    out = dict(data)
    out["run"] = run
    out["bath"] = bath
    return out


def env_default(name: str, value, cast=str, environ=None):
    env = os.environ if environ is None else environ
    if value is not None:
        return value
    raw = env.get(ENV_PREFIX + name)
    return None if raw is None else cast(raw)


def with_trajectories(config: EnsembleConfig, trajectories: int) -> EnsembleConfig:
    return replace(config, trajectories=trajectories)
