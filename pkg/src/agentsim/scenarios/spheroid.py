"""Tumor spheroid: growing, dividing, jiggling and dying cancer cells."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analysis.hull import convex_hull_diameter
from ..analysis.timeseries import TimeSeries
from ..core import Agent, Behavior, EventKind, NewAgentEvent, Operation, OpKind, Simulation
from ..mechanics import MechanicalForces, MechanicsParams

CASES = {2000: 310.0, 4000: 380.0, 8000: 460.0}


@dataclass
class SpheroidParams:
    """One spheroid experiment.

    Time is in days with ``1 / steps_per_day`` per step.  ``growth_rate`` is in
    cubic micrometers per day and is set so a cell doubles its volume in
    ``doubling_days``.  Cells divide once their diameter reaches the size of
    twice the newborn volume.
    """

    n_cells: int = 2000
    cluster_diameter: float = 310.0
    cell_diameter: float = 14.0
    doubling_days: float = 6.0
    brownian_scale: float = 2.0
    apoptosis_per_day: float = 0.004
    steps_per_day: int = 4
    start_day: float = 3.0
    end_day: float = 15.0
    relax_steps: int = 50
    mechanics: MechanicsParams = field(default_factory=lambda: MechanicsParams(viscosity=10.0))

    def __post_init__(self):
        if self.n_cells < 1 or self.cluster_diameter <= 0 or self.cell_diameter <= 0:
            raise ValueError("cell count, cluster and cell diameters must be positive")
        if self.doubling_days <= 0 or self.brownian_scale < 0 or self.apoptosis_per_day < 0:
            raise ValueError("invalid growth, migration or apoptosis parameters")
        if self.end_day < self.start_day:
            raise ValueError("end_day must not precede start_day")

    @classmethod
    def for_case(cls, n_cells: int, **overrides) -> "SpheroidParams":
        if n_cells not in CASES:
            raise ValueError(f"no spheroid case with {n_cells} cells; known: {sorted(CASES)}")
        return cls(n_cells=n_cells, cluster_diameter=CASES[n_cells], **overrides)

    @property
    def newborn_volume(self) -> float:
        return math.pi / 6.0 * self.cell_diameter**3

    @property
    def growth_rate(self) -> float:
        return self.newborn_volume / self.doubling_days

    @property
    def division_diameter(self) -> float:
        return self.cell_diameter * 2.0 ** (1.0 / 3.0)

    @property
    def apoptosis_probability(self) -> float:
        return min(1.0, self.apoptosis_per_day / self.steps_per_day)

    @property
    def n_steps(self) -> int:
        return self.relax_steps + int(round((self.end_day - self.start_day) * self.steps_per_day))

    def day(self, step: int) -> float:
        return self.start_day + (step - self.relax_steps) / self.steps_per_day


class SpheroidCell(Behavior):
    """Growth, division, Brownian migration and apoptosis in one behavior.

    Does nothing during the initial relaxation steps.
    """

    batched = True

    def __init__(self, params: SpheroidParams):
        super().__init__(copy_on=(EventKind.CELL_DIVISION,))
        self.params = params

    def run_batch(self, sim: Simulation, rows: np.ndarray) -> None:
        p = self.params
        if sim.step < p.relax_steps or len(rows) == 0:
            return
        store = sim.store
        rng = sim.rng
        if p.growth_rate > 0:
            volume = math.pi / 6.0 * store["diameter"][rows] ** 3 + p.growth_rate * sim.dt
            store["diameter"][rows] = (6.0 * volume / math.pi) ** (1.0 / 3.0)
        ids = store.ids[rows]
        for agent_id in ids[store["diameter"][rows] >= p.division_diameter * (1 - 1e-12)]:
            sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, int(agent_id), {"ratio": 0.5}))
        if p.brownian_scale > 0:
            store["position"][rows] += rng.normal(scale=p.brownian_scale, size=(len(rows), 3))
        dying = rng.random(len(rows)) < p.apoptosis_probability
        for agent_id in ids[dying]:
            sim.remove_agent(int(agent_id))


def random_points_in_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]


class HullSampler:
    """Record day, population and hull diameter once per simulated day after relaxation."""

    def __init__(self, params: SpheroidParams, series: TimeSeries):
        self.params = params
        self.series = series

    def __call__(self, sim: Simulation) -> None:
        p = self.params
        k = sim.step - p.relax_steps
        if k < 0 or k % p.steps_per_day:
            return
        hull = convex_hull_diameter(sim.store["position"])
        self.series.record(sim.step, day=p.day(sim.step), cells=sim.population, hull_diameter=hull.diameter)


def build(params: SpheroidParams, seed: int = 0, threads: int = 1) -> tuple[Simulation, TimeSeries]:
    sim = Simulation(seed=seed, dt=1.0 / params.steps_per_day, threads=threads, detect_stationary=False)
    rng = sim.random.main
    pos = random_points_in_ball(rng, params.n_cells, params.cluster_diameter / 2.0)
    # volumes spread over one cycle so divisions are not synchronized
    volume = params.newborn_volume * (1.0 + rng.random(params.n_cells) * 0.999)
    diam = (6.0 * volume / math.pi) ** (1.0 / 3.0)
    cell = SpheroidCell(params)
    sim.add_agents(Agent(pos[k], float(diam[k]), behaviors=[cell]) for k in range(params.n_cells))
    MechanicalForces(params.mechanics, skip_stationary=False).install(sim)
    series = TimeSeries(["day", "cells", "hull_diameter"])
    sim.add_operation(Operation("hull_diameter", HullSampler(params, series), OpKind.STANDALONE, at_end=True), before="behaviors")
    sim.params["spheroid"] = params
    return sim, series


@dataclass
class SpheroidRun:
    params: SpheroidParams
    series: TimeSeries
    sim: Simulation = field(repr=False)

    def write_artifacts(self, outdir) -> list[Path]:
        path = Path(outdir) / "hull_diameter.csv"
        self.series.to_csv(path)
        return [path]


def run(params: SpheroidParams, seed: int = 0, threads: int = 1, steps: int | None = None) -> SpheroidRun:
    sim, series = build(params, seed, threads)
    sim.simulate(params.n_steps if steps is None else steps)
    sim.close()
    return SpheroidRun(params, series, sim)
