"""Registered scenarios runnable from the command line."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable

from ..config import build_dataclass
from . import benchmarks, pyramidal, sir, spheroid


@dataclass
class ScenarioSpec:
    name: str
    make_params: Callable[[dict], Any]
    run: Callable[..., Any]
    """``run(params, seed, threads, steps) -> object`` with ``series``, ``sim``
    and ``write_artifacts(outdir)``."""
    default_steps: Callable[[Any], int]


def _sir_params(values: dict) -> sir.SirParams:
    values = dict(values)
    base = sir.SirParams.for_disease(values.pop("disease", "measles"))
    return build_dataclass(sir.SirParams, {**dataclasses.asdict(base), **values})


def _spheroid_params(values: dict) -> spheroid.SpheroidParams:
    values = dict(values)
    n = values.get("n_cells", 2000)
    if "cluster_diameter" not in values and n in spheroid.CASES:
        values["cluster_diameter"] = spheroid.CASES[n]
    return build_dataclass(spheroid.SpheroidParams, values)


def _benchmark(name: str) -> ScenarioSpec:
    params_cls, builder = benchmarks.BENCHMARKS[name]

    def run(params, seed=0, threads=1, steps=None):
        sim, series = builder(params, seed, threads)
        report = sim.simulate(10 if steps is None else steps)
        sim.close()
        return benchmarks.BenchmarkRun(name, series, sim, report.wall_time)

    return ScenarioSpec(name, lambda v: build_dataclass(params_cls, v), run, lambda p: 10)


def _run_pyramidal(params, seed=0, threads=1, steps=None):
    return pyramidal.run(params, seed, threads, 500 if steps is None else steps)


SCENARIOS: dict[str, ScenarioSpec] = {
    "sir": ScenarioSpec("sir", _sir_params, sir.run, lambda p: p.n_steps),
    "pyramidal": ScenarioSpec(
        "pyramidal", lambda v: build_dataclass(pyramidal.PyramidalParams, v), _run_pyramidal, lambda p: 500
    ),
    "spheroid": ScenarioSpec("spheroid", _spheroid_params, spheroid.run, lambda p: p.n_steps),
    "cell_growth_division": _benchmark("cell_growth_division"),
    "soma_clustering": _benchmark("soma_clustering"),
}


def get_scenario(name: str) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(sorted(SCENARIOS))}")
    return SCENARIOS[name]


__all__ = ["SCENARIOS", "ScenarioSpec", "get_scenario"]
