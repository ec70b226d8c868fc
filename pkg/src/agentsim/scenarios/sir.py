"""Spatial SIR epidemic: people moving randomly in a cube."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..analysis.pso import PsoConfig, PsoResult, pso_optimize
from ..analysis.sir_ode import SirOdeParams, derive_rates, final_size, solve_sir_ode
from ..analysis.timeseries import Sampler, TimeSeries
from ..core import Agent, Behavior, Simulation

SUSCEPTIBLE, INFECTED, RECOVERED = 0, 1, 2

DISEASES = {
    "measles": {"r0": 12.9, "recovery_days": 8.0, "days": 60.0},
    "influenza": {"r0": 1.3, "recovery_days": 4.1, "days": 150.0},
}

# spatial parameters fitted with ``calibrate`` (swarm 10, 8 iterations, seeds 0..9)
FITTED = {
    "measles": {"infection_radius": 4.4893, "infection_probability": 0.66188, "max_move": 38.692},
    "influenza": {"infection_radius": 2.6232, "infection_probability": 0.56625, "max_move": 33.455},
}


@dataclass
class SirParams:
    """Epidemic in a cube of side ``cube_length`` with reflecting walls.

    The per-step recovery probability is ``1 / recovery_days / steps_per_day``.
    ``r0`` only matters for the ODE reference.
    """

    disease: str = "measles"
    r0: float = 12.9
    recovery_days: float = 8.0
    n_susceptible: int = 2000
    n_infected: int = 10
    cube_length: float = 100.0
    infection_radius: float = 4.0
    infection_probability: float = 0.6
    max_move: float = 30.0
    steps_per_day: int = 4
    days: float = 60.0
    agent_diameter: float = 1.0

    def __post_init__(self):
        for name in ("infection_probability",):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.infection_radius <= 0 or self.cube_length <= 0 or self.max_move < 0:
            raise ValueError("radius and cube length must be positive, max_move non-negative")
        if self.steps_per_day < 1 or self.recovery_days <= 0:
            raise ValueError("steps_per_day must be >= 1 and recovery_days positive")

    @classmethod
    def for_disease(cls, disease: str, **overrides) -> "SirParams":
        if disease not in DISEASES:
            raise ValueError(f"unknown disease {disease!r}; known: {sorted(DISEASES)}")
        base = dict(DISEASES[disease], disease=disease)
        base.update(FITTED.get(disease, {}))
        base.update(overrides)
        return cls(**base)

    @property
    def n_total(self) -> int:
        return self.n_susceptible + self.n_infected

    @property
    def recovery_probability(self) -> float:
        return min(1.0, 1.0 / self.recovery_days / self.steps_per_day)

    @property
    def n_steps(self) -> int:
        return int(round(self.days * self.steps_per_day))

    def ode(self) -> SirOdeParams:
        beta, gamma = derive_rates(self.r0, self.recovery_days)
        return SirOdeParams(beta, gamma, self.n_total, self.n_susceptible, self.n_infected)


class SirInfection(Behavior):
    """Susceptible agents with an infected agent in range catch it with one draw per step."""

    batched = True

    def __init__(self, radius: float, probability: float):
        super().__init__()
        self.radius = radius
        self.probability = probability

    def run_batch(self, sim, rows):
        snap_state = sim.snapshot["sir_state"]
        rows_s = rows[snap_state[rows] == SUSCEPTIBLE]
        if len(rows_s) == 0:
            return
        draws = sim.rng.random(len(rows_s))
        pos = sim.snapshot["position"]
        rows_i = np.flatnonzero(snap_state == INFECTED)
        # distance is symmetric: query from whichever side is smaller
        if len(rows_i) < len(rows_s):
            _, j = sim.grid.neighbor_pairs(self.radius, rows=rows_i, positions=pos, sort=False)
            exposed_rows = np.unique(j)
        else:
            i, j = sim.grid.neighbor_pairs(self.radius, rows=rows_s, positions=pos, sort=False)
            exposed_rows = np.unique(i[snap_state[j] == INFECTED])
        exposed = np.isin(rows_s, exposed_rows)
        hit = exposed & (draws < self.probability)
        sim.store["sir_state"][rows_s[hit]] = INFECTED


class SirRecovery(Behavior):
    """Agents infected at the start of the step recover with a fixed probability."""

    batched = True

    def __init__(self, probability: float):
        super().__init__()
        self.probability = probability

    def run_batch(self, sim, rows):
        rows_i = rows[sim.snapshot["sir_state"][rows] == INFECTED]
        if len(rows_i) == 0:
            return
        hit = sim.rng.random(len(rows_i)) < self.probability
        sim.store["sir_state"][rows_i[hit]] = RECOVERED


def random_ball_vectors(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """Vectors uniformly distributed in the ball of the given radius."""
    v = rng.normal(size=(n, 3))
    norm = np.linalg.norm(v, axis=1)
    norm[norm == 0] = 1.0
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return v / norm[:, None] * r[:, None]


def reflect_into(x: np.ndarray, length: float) -> np.ndarray:
    """Fold coordinates back into ``[0, length]`` by mirror reflection at the walls."""
    y = np.mod(x, 2.0 * length)
    return np.where(y > length, 2.0 * length - y, y)


class SirMovement(Behavior):
    """Random step of bounded length; walls reflect."""

    batched = True

    def __init__(self, max_move: float, cube_length: float):
        super().__init__()
        self.max_move = max_move
        self.cube_length = cube_length

    def run_batch(self, sim, rows):
        if self.max_move == 0:
            return
        pos = sim.store["position"]
        pos[rows] = reflect_into(pos[rows] + random_ball_vectors(sim.rng, len(rows), self.max_move), self.cube_length)


def count_sir(states: np.ndarray, workers: int = 1) -> tuple[int, int, int]:
    """Compartment counts; ``workers`` > 1 reduces over chunks."""
    states = np.asarray(states)
    total = np.zeros(3, dtype=np.int64)
    for chunk in np.array_split(states, max(1, workers)):
        total += np.bincount(chunk.astype(np.int64), minlength=3)[:3]
    return int(total[0]), int(total[1]), int(total[2])


def build(params: SirParams, seed: int = 0, threads: int = 1) -> tuple[Simulation, TimeSeries]:
    sim = Simulation(
        seed=seed,
        dt=1.0 / params.steps_per_day,
        threads=threads,
        min_box_size=params.infection_radius,
        detect_stationary=False,
    )
    sim.declare_attribute("sir_state", np.int8, SUSCEPTIBLE)
    behaviors = [
        SirInfection(params.infection_radius, params.infection_probability),
        SirRecovery(params.recovery_probability),
        SirMovement(params.max_move, params.cube_length),
    ]
    rng = sim.random.main
    n = params.n_total
    positions = rng.uniform(0.0, params.cube_length, size=(n, 3))
    for k in range(n):
        state = INFECTED if k >= params.n_susceptible else SUSCEPTIBLE
        sim.add_agent(Agent(positions[k], params.agent_diameter, behaviors=list(behaviors), attributes={"sir_state": state}))
    series = TimeSeries(["S", "I", "R"])

    def probe(s: Simulation) -> dict:
        S, I, R = count_sir(s.store["sir_state"], s.threads)
        return {"S": S, "I": I, "R": R}

    Sampler(series, probe).install(sim, "count_sir")
    sim.params["sir"] = params
    return sim, series


@dataclass
class SirRun:
    params: SirParams
    series: TimeSeries
    sim: Simulation = field(repr=False)
    positions_ok: bool = True

    @property
    def days(self) -> np.ndarray:
        return np.asarray(self.series.steps) / self.params.steps_per_day

    def write_artifacts(self, outdir) -> list[Path]:
        path = Path(outdir) / "sir_counts.csv"
        self.series.to_csv(path)
        return [path]


def run(params: SirParams, seed: int = 0, threads: int = 1, steps: int | None = None, check_positions: bool = False) -> SirRun:
    sim, series = build(params, seed, threads)
    n = params.n_steps if steps is None else steps
    ok = True
    if check_positions:
        for _ in range(n):
            sim.simulate(1)
            p = sim.store["position"]
            ok &= bool(np.all((p >= 0) & (p <= params.cube_length)))
    else:
        sim.simulate(n)
    sim.close()
    return SirRun(params, series, sim, ok)


def mean_curves(params: SirParams, seeds, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Mean S, I, R over repetitions: ``(days, (3, T) array)``."""
    curves = []
    days = None
    for seed in seeds:
        r = run(params, seed, threads)
        days = r.days
        curves.append(np.stack([r.series["S"], r.series["I"], r.series["R"]]).astype(float))
    return days, np.mean(curves, axis=0)


def ode_curves(params: SirParams, days: np.ndarray, dt: float = 0.01) -> np.ndarray:
    t, S, I, R = solve_sir_ode(params.ode(), float(days[-1]), dt)
    return np.stack([np.interp(days, t, S), np.interp(days, t, I), np.interp(days, t, R)])


def rmse_per_compartment(agent: np.ndarray, ode: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((agent - ode) ** 2, axis=1))


def calibration_loss(params: SirParams, seeds, threads: int = 1) -> float:
    """Sum over S, I, R of the RMSE between mean agent curves and the ODE, over N."""
    days, mean = mean_curves(params, seeds, threads)
    return float(rmse_per_compartment(mean, ode_curves(params, days)).sum() / params.n_total)


def expected_final_size(params: SirParams) -> float:
    """Fraction of the population ever infected according to the ODE final-size relation."""
    return 1.0 - final_size(params.r0, params.n_susceptible / params.n_total)


def mean_field_guess(params: SirParams, probability: float = 0.5) -> float:
    """Infection radius for which well-mixed contact matches the ODE transmission rate."""
    beta, _ = derive_rates(params.r0, params.recovery_days)
    per_step = beta / params.steps_per_day / params.n_total / probability
    volume = per_step * params.cube_length**3
    return (3.0 * volume / (4.0 * math.pi)) ** (1.0 / 3.0)


CALIBRATION_BOUNDS = ((1.0, 10.0), (0.05, 1.0), (1.0, 50.0))
"""Search box for (infection_radius, infection_probability, max_move)."""


def with_spatial(params: SirParams, x) -> SirParams:
    return replace(params, infection_radius=float(x[0]), infection_probability=float(x[1]), max_move=float(x[2]))


def calibrate(
    params: SirParams,
    bounds=CALIBRATION_BOUNDS,
    swarm_size: int = 30,
    iterations: int = 100,
    repetitions: int = 10,
    seed: int = 0,
    initial=(),
    threads: int = 1,
) -> tuple[SirParams, PsoResult]:
    """Fit radius, infection probability and step length to the ODE by PSO.

    Each objective evaluation averages ``repetitions`` runs seeded
    ``0 .. repetitions - 1``.  The mean-field radius guess is always one of
    the starting particles.
    """
    if len(bounds) != 3:
        raise ValueError("calibration needs bounds for radius, probability and max_move")
    seeds = range(repetitions)
    prob0 = min(max(0.5, bounds[1][0]), bounds[1][1])
    guess = [mean_field_guess(params, prob0), prob0, min(max(30.0, bounds[2][0]), bounds[2][1])]
    starts = [list(x) for x in initial] + [guess]

    def objective(x):
        return calibration_loss(with_spatial(params, x), seeds, threads)

    result = pso_optimize(PsoConfig(
        objective, bounds, swarm_size=swarm_size, iterations=iterations, seed=seed, initial=starts,
    ))
    return with_spatial(params, result.best_position), result
