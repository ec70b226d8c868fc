"""Performance benchmarks: a dividing cell lattice and self-sorting somata."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ..analysis.timeseries import Sampler, TimeSeries
from ..core import Agent, Behavior, EventKind, NewAgentEvent, Operation, OpKind, Simulation
from ..diffusion import DiffusionGrid, DiffusionStep
from ..mechanics import MechanicalForces, MechanicsParams


@dataclass
class CellGrowthParams:
    """``(4 * scale)**3`` cells on a cubic lattice, each doubling its volume
    every ``doubling_steps`` steps and then dividing."""

    scale: int = 1
    spacing: float = 15.0
    cell_diameter: float = 10.0
    doubling_steps: float = 10.0
    mechanics: MechanicsParams = field(default_factory=lambda: MechanicsParams(viscosity=40.0))

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("benchmark scale must be >= 1")
        if self.doubling_steps <= 0:
            raise ValueError("doubling_steps must be positive")

    @property
    def side(self) -> int:
        return 4 * self.scale

    @property
    def n_cells(self) -> int:
        return self.side**3

    @property
    def newborn_volume(self) -> float:
        return math.pi / 6.0 * self.cell_diameter**3

    @property
    def division_diameter(self) -> float:
        return self.cell_diameter * 2.0 ** (1.0 / 3.0)


class GrowDivide(Behavior):
    """Grow by a fixed volume per step and divide at twice the newborn volume."""

    batched = True

    def __init__(self, rate: float, threshold: float):
        super().__init__(copy_on=(EventKind.CELL_DIVISION,))
        self.rate = rate
        self.threshold = threshold

    def run_batch(self, sim: Simulation, rows: np.ndarray) -> None:
        d = sim.store["diameter"]
        volume = math.pi / 6.0 * d[rows] ** 3 + self.rate * sim.dt
        d[rows] = (6.0 * volume / math.pi) ** (1.0 / 3.0)
        for agent_id in sim.store.ids[rows[d[rows] >= self.threshold * (1 - 1e-12)]]:
            sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, int(agent_id), {"ratio": 0.5}))


def lattice(side: int, spacing: float) -> np.ndarray:
    g = np.arange(side) * spacing
    return np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)


def build_cell_growth(params: CellGrowthParams, seed: int = 0, threads: int = 1) -> tuple[Simulation, TimeSeries]:
    sim = Simulation(seed=seed, dt=1.0, threads=threads)
    rng = sim.random.main
    pos = lattice(params.side, params.spacing)
    # random phase in the growth cycle
    volume = params.newborn_volume * (1.0 + 0.999 * rng.random(len(pos)))
    diam = (6.0 * volume / math.pi) ** (1.0 / 3.0)
    behavior = GrowDivide(params.newborn_volume / params.doubling_steps, params.division_diameter)
    sim.add_agents(Agent(p, float(d), behaviors=[behavior]) for p, d in zip(pos, diam))
    MechanicalForces(params.mechanics).install(sim)
    series = TimeSeries(["agents"])
    Sampler(series, lambda s: {"agents": s.population}).install(sim, "population")
    return sim, series


@dataclass
class SomaClusteringParams:
    """``(4 * scale)**3`` somata of two types in a cube, each secreting its own
    substance and climbing that substance's gradient."""

    scale: int = 1
    spacing: float = 20.0
    cell_diameter: float = 10.0
    speed: float = 1.0
    secretion: float = 1.0
    diffusion: float = 4.0
    decay: float = 0.01
    lattice_spacing: float = 5.0
    neighbors: int = 5
    mechanics: MechanicsParams = field(default_factory=lambda: MechanicsParams(viscosity=40.0))

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("benchmark scale must be >= 1")
        if self.neighbors < 1:
            raise ValueError("neighbors must be >= 1")

    @property
    def n_cells(self) -> int:
        return (4 * self.scale) ** 3

    @property
    def cube_length(self) -> float:
        return 4 * self.scale * self.spacing


class FollowOwnGradient(Behavior):
    """Move up the gradient of the substance secreted by the cell's own type."""

    batched = True

    def __init__(self, substances: tuple[str, str], speed: float, box: float):
        super().__init__(copy_on=(EventKind.CELL_DIVISION,))
        self.substances = substances
        self.speed = speed
        self.box = box

    def run_batch(self, sim: Simulation, rows: np.ndarray) -> None:
        store = sim.store
        pos = sim.snapshot["position"]
        kind = sim.snapshot["cell_type"]
        for t, name in enumerate(self.substances):
            sel = rows[kind[rows] == t]
            if len(sel) == 0:
                continue
            grid = sim.fields[name]
            g = grid.gradient_at(pos[sel])
            n = np.linalg.norm(g, axis=1, keepdims=True)
            step = np.divide(g, n, out=np.zeros_like(g), where=n > 1e-12) * self.speed * sim.dt
            store["position"][sel] = np.clip(store["position"][sel] + step, 0.0, self.box)


class Secretion:
    """Standalone operation: every cell adds substance at its position, in id order."""

    def __init__(self, substances: tuple[str, str], amount: float):
        self.substances = substances
        self.amount = amount

    def __call__(self, sim: Simulation) -> None:
        pos = sim.snapshot["position"]
        kind = sim.snapshot["cell_type"]
        for t, name in enumerate(self.substances):
            sim.fields[name].deposit(pos[kind == t], self.amount)


def same_type_fraction(positions, types, k: int = 5) -> float:
    """Mean over cells of the share of their ``k`` nearest neighbors with the same type."""
    positions = np.asarray(positions, dtype=float)
    types = np.asarray(types)
    k = min(k, len(positions) - 1)
    if k < 1:
        return 1.0
    _, idx = cKDTree(positions).query(positions, k=k + 1)
    return float(np.mean(types[idx[:, 1:]] == types[:, None]))


def build_soma_clustering(params: SomaClusteringParams, seed: int = 0, threads: int = 1) -> tuple[Simulation, TimeSeries]:
    sim = Simulation(seed=seed, dt=1.0, threads=threads)
    sim.declare_attribute("cell_type", np.int8, 0)
    rng = sim.random.main
    L = params.cube_length
    names = ("substance_0", "substance_1")
    for name in names:
        sim.fields[name] = DiffusionGrid.covering(
            name, (0, 0, 0), (L, L, L), params.lattice_spacing,
            diffusion=params.diffusion, decay=params.decay, dt=sim.dt,
        )
    pos = rng.uniform(0.0, L, size=(params.n_cells, 3))
    types = rng.permutation(np.arange(params.n_cells) % 2)
    behavior = FollowOwnGradient(names, params.speed, L)
    sim.add_agents(
        Agent(p, params.cell_diameter, behaviors=[behavior], attributes={"cell_type": int(t)})
        for p, t in zip(pos, types)
    )
    sim.add_operation(Operation("secretion", Secretion(names, params.secretion), OpKind.STANDALONE))
    DiffusionStep().install(sim)
    MechanicalForces(params.mechanics).install(sim)
    series = TimeSeries(["same_type_fraction"])
    Sampler(series, lambda s: {
        "same_type_fraction": same_type_fraction(s.store["position"], s.store["cell_type"], params.neighbors)
    }).install(sim, "clustering", frequency=50)
    return sim, series


BENCHMARKS = {
    "cell_growth_division": (CellGrowthParams, build_cell_growth),
    "soma_clustering": (SomaClusteringParams, build_soma_clustering),
}


def build_benchmark(name: str, scale: int = 1, seed: int = 0, threads: int = 1, **overrides):
    """Assemble a registered benchmark at the given scale."""
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; valid: {', '.join(sorted(BENCHMARKS))}")
    params_cls, builder = BENCHMARKS[name]
    params = params_cls(scale=scale, **overrides)
    sim, series = builder(params, seed, threads)
    return sim, series, params


@dataclass
class BenchmarkRun:
    name: str
    series: TimeSeries
    sim: Simulation = field(repr=False)
    wall_time: float = 0.0

    def write_artifacts(self, outdir) -> list[Path]:
        return []
