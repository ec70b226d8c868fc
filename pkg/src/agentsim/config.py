"""TOML run configuration: ``[simulation]``, ``[scenario.<name>]`` and ``[output]``."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``column`` are set for syntax errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


SECTIONS = {"simulation", "scenario", "output", "calibration", "targets", "bounds", "pso"}


@dataclass
class RunConfig:
    scenario: str
    seed: int = 0
    threads: int = 1
    steps: int | None = None
    out: Path = Path("out")
    parameters: dict = field(default_factory=dict)
    config_path: Path | None = None

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError("thread count must be >= 1")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be >= 0")


def bundled_config(name: str) -> Path | None:
    """Path of a config file shipped with the package, or None."""
    ref = resources.files("agentsim") / "configs" / name
    return Path(str(ref)) if ref.is_file() else None


def resolve_path(path) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    bundled = bundled_config(p.name)
    if bundled is not None:
        return bundled
    raise ConfigError(f"config file not found: {path}")


def parse_toml(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # tomli appends "(at line L, column C)"; keep the bare message
        msg = str(exc).split(" (at line")[0]
        raise ConfigError(f"config parse error: {msg}", getattr(exc, "lineno", None), getattr(exc, "colno", None)) from exc


def load_file(path) -> dict:
    data = parse_toml(Path(path).read_text())
    unknown = set(data) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def parse_value(text: str):
    """Typed scalar from an override string; bare words stay strings."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(data: dict, scenario: str, overrides) -> dict:
    """Apply ``key=value`` strings.  Keys without a known section prefix go to
    the scenario section; dots address nested tables."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if parts[0] not in ("simulation", "output", "scenario"):
            parts = ["scenario", scenario, *parts]
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} addresses a scalar")
        node[parts[-1]] = parse_value(value.strip())
    return data


def build_dataclass(cls, values: dict, where: str = ""):
    """Instantiate dataclass ``cls`` from a mapping, recursing into nested
    dataclass fields and turning lists into tuples where the default is one."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"unknown parameter {where}{key!r}; valid: {sorted(names)}")
        hint = hints.get(key)
        if dataclasses.is_dataclass(hint) and isinstance(value, dict):
            value = build_dataclass(hint, value, f"{where}{key}.")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for {cls.__name__}: {exc}") from exc


def make_run_config(scenario: str, config_path=None, seed=None, threads=None, steps=None, out=None, overrides=()) -> RunConfig:
    """Merge file values, then CLI flags and overrides (CLI wins)."""
    data: dict = {}
    path = None
    if config_path is not None:
        path = resolve_path(config_path)
        data = load_file(path)
    data = apply_overrides(data, scenario, overrides)
    sim = data.get("simulation", {})
    output = data.get("output", {})
    scen = data.get("scenario", {})
    others = set(scen) - {scenario}
    if others:
        raise ConfigError(f"config has sections for other scenarios: {sorted(others)}")
    return RunConfig(
        scenario=scenario,
        seed=int(seed if seed is not None else sim.get("seed", 0)),
        threads=int(threads if threads is not None else sim.get("threads", 1)),
        steps=steps if steps is not None else sim.get("steps"),
        out=Path(out if out is not None else output.get("dir", "out")),
        parameters=dict(scen.get(scenario, {})),
        config_path=path,
    )
