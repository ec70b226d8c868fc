"""Pyramidal neuron growth: one apical and three basal dendrites climbing growth-factor gradients."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..analysis.morphometrics import morphometrics
from ..analysis.timeseries import Sampler, TimeSeries
from ..core import Behavior, EventKind, Shape, Simulation
from ..diffusion import DiffusionGrid
from ..neuro import (
    APICAL,
    BASAL,
    NeuriteMechanics,
    NeuroParams,
    add_soma,
    branch_terminal,
    elongate_terminal,
    extend_new_neurite,
    install_neuro,
    to_swc,
    write_swc,
)

_FIELD = {APICAL: "apical_gf", BASAL: "basal_gf"}


@dataclass
class PyramidalParams:
    """Growth rules per lineage.

    Weights are (gradient, previous direction, random).  Speeds are in
    micrometers per step with ``dt = 1``; the basal speed is always half the
    apical one.
    """

    apical_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)
    basal_weights: tuple[float, float, float] = (0.2, 0.6, 0.2)
    apical_speed: float = 1.5
    p_apical: float = 0.038
    p_basal: float = 0.006
    apical_diameter: float = 3.0
    basal_diameter: float = 2.0
    taper_rate: float = 0.001
    n_basal: int = 3
    soma_diameter: float = 10.0
    branch_angle: tuple[float, float] = (15.0, 45.0)
    # growth factors: Gaussian along z, no diffusion or decay
    apical_field: tuple[float, float, float] = (400.0, 200.0, 1.0)
    basal_field: tuple[float, float, float] = (-200.0, 150.0, 1.0)
    field_extent: float = 600.0
    field_spacing: float = 20.0
    neuro: NeuroParams = field(default_factory=NeuroParams)

    def __post_init__(self):
        for w in (self.apical_weights, self.basal_weights):
            if len(w) != 3 or min(w) < 0:
                raise ValueError("direction weights must be three non-negative numbers")
        for p in (self.p_apical, self.p_basal):
            if not 0.0 <= p <= 1.0:
                raise ValueError("branch probabilities must lie in [0, 1]")
        if self.apical_speed <= 0:
            raise ValueError("apical speed must be positive")

    @property
    def basal_speed(self) -> float:
        return self.apical_speed / 2.0

    def weights(self, lineage: int) -> tuple[float, float, float]:
        return self.apical_weights if lineage == APICAL else self.basal_weights

    def speed(self, lineage: int) -> float:
        return self.apical_speed if lineage == APICAL else self.basal_speed

    def probability(self, lineage: int) -> float:
        return self.p_apical if lineage == APICAL else self.p_basal


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def growth_direction(gradient, previous, random, weights) -> np.ndarray:
    """Weighted sum of the unit gradient, previous direction and random vector.

    A zero gradient drops its term.  Rows are normalized.
    """
    gradient = np.atleast_2d(gradient)
    g_norm = np.linalg.norm(gradient, axis=1, keepdims=True)
    g_unit = np.divide(gradient, g_norm, out=np.zeros_like(gradient), where=g_norm > 0)
    w_g, w_p, w_r = weights
    d = w_g * g_unit + w_p * np.atleast_2d(previous) + w_r * np.atleast_2d(random)
    n = np.linalg.norm(d, axis=1, keepdims=True)
    # all terms cancelled: keep going straight
    return np.where(n > 0, d / np.where(n > 0, n, 1.0), np.atleast_2d(previous))


def _rotate(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``v`` about the unit ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1 - c)


def bifurcation_directions(rng: np.random.Generator, axis: np.ndarray, angles_deg) -> np.ndarray:
    """Two directions on either side of ``axis`` in a random plane."""
    perp = np.cross(axis, rng.normal(size=3))
    perp /= np.linalg.norm(perp)
    lo, hi = np.radians(angles_deg)
    a1, a2 = rng.uniform(lo, hi, size=2)
    return np.stack([_rotate(axis, perp, a1), _rotate(axis, perp, -a2)])


class PyramidalGrowth(Behavior):
    """Elongate every growing terminal and sometimes bifurcate it.

    One shared instance rides on all neurite elements.  Each step records a
    branching opportunity per terminal that could branch, tallied under
    ``("opportunities", lineage)``; realized bifurcations go under
    ``("bifurcations", lineage)``.
    """

    batched = True

    def __init__(self, params: PyramidalParams):
        super().__init__(copy_on=(EventKind.NEURITE_EXTENSION, EventKind.NEURITE_BIFURCATION))
        self.params = params

    def run_batch(self, sim: Simulation, rows: np.ndarray) -> None:
        snap = sim.snapshot
        p = self.params
        d_min = sim.params["neuro"].min_diameter
        growing = (
            (snap["shape"][rows] == Shape.CYLINDER)
            & np.all(snap["daughters"][rows] < 0, axis=1)
            & (snap["diameter"][rows] > d_min)
        )
        rows = rows[growing]
        if len(rows) == 0:
            return
        rng = sim.rng
        ids = snap["id"][rows]
        lineage = snap["lineage"][rows]
        distal = snap["distal"][rows]
        axis = snap["distal"][rows] - snap["proximal"][rows]
        axis /= np.linalg.norm(axis, axis=1, keepdims=True)
        rand = random_unit_vectors(rng, len(rows))
        draws = rng.random(len(rows))
        max_len = sim.params["neuro"].max_length
        for lin in (APICAL, BASAL):
            sel = np.flatnonzero(lineage == lin)
            if len(sel) == 0:
                continue
            grad = sim.fields[_FIELD[lin]].gradient_at(distal[sel])
            dirs = growth_direction(grad, axis[sel], rand[sel], p.weights(lin))
            prob = p.probability(lin)
            speed = p.speed(lin)
            for k, d in zip(sel, dirs):
                eid = int(ids[k])
                elongate_terminal(sim, eid, speed, d, p.taper_rate)
                el = sim.agent(eid)
                if el["length"] > max_len:
                    # a split is pending; the element stops being terminal
                    continue
                if lin == APICAL and not snap["main_branch"][rows[k]]:
                    continue
                sim.tally(("opportunities", lin))
                if draws[k] < prob:
                    sim.tally(("bifurcations", lin))
                    branch_terminal(
                        sim, eid, EventKind.NEURITE_BIFURCATION,
                        bifurcation_directions(rng, d, p.branch_angle),
                    )


def basal_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` directions spread in azimuth, pointing 30 degrees below the equator."""
    phi0 = rng.uniform(0, 2 * math.pi)
    phi = phi0 + 2 * math.pi * np.arange(n) / max(n, 1)
    el = math.radians(-30.0)
    return np.stack([np.cos(phi) * math.cos(el), np.sin(phi) * math.cos(el), np.full(n, math.sin(el))], axis=1)


def tree_counts(sim: Simulation) -> dict:
    store = sim.store
    cyl = store["shape"] == Shape.CYLINDER
    d = store["daughters"][cyl]
    return {
        "elements": int(cyl.sum()),
        "terminals": int(np.all(d < 0, axis=1).sum()),
        "branch_points": int(np.all(d >= 0, axis=1).sum()),
    }


def build(params: PyramidalParams, seed: int = 0, threads: int = 1) -> tuple[Simulation, TimeSeries, int]:
    sim = Simulation(seed=seed, dt=1.0, threads=threads)
    install_neuro(sim, params.neuro)
    ext = params.field_extent
    for lin, (mean, sigma, amp) in ((APICAL, params.apical_field), (BASAL, params.basal_field)):
        g = DiffusionGrid.covering(_FIELD[lin], (-ext, -ext, -ext), (ext, ext, ext), params.field_spacing)
        g.init_gaussian_axis(2, mean, sigma, amp)
        sim.fields[g.name] = g
    soma = add_soma(sim, (0.0, 0.0, 0.0), params.soma_diameter)
    growth = PyramidalGrowth(params)
    root = extend_new_neurite(sim, soma, (0.0, 0.0, 1.0), params.apical_diameter, "apical")
    sim.attach_behavior(root, growth)
    for d in basal_directions(params.n_basal, sim.random.main):
        root = extend_new_neurite(sim, soma, d, params.basal_diameter, "basal")
        sim.attach_behavior(root, growth)
    NeuriteMechanics().install(sim)
    series = TimeSeries(["elements", "terminals", "branch_points"])
    Sampler(series, tree_counts).install(sim, "tree_counts")
    sim.params["pyramidal"] = params
    return sim, series, soma


@dataclass
class PyramidalRun:
    params: PyramidalParams
    series: TimeSeries
    sim: Simulation = field(repr=False)
    soma: int = 0

    def opportunities(self, lineage: int) -> int:
        return int(self.sim.tallies[("opportunities", lineage)])

    def write_artifacts(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        swc = outdir / "neuron.swc"
        write_swc(to_swc(self.sim, self.soma), swc)
        table = outdir / "morphometrics.csv"
        stats = morphometrics(self.sim, self.soma)
        with open(table, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["root", "lineage", "branch_points", "total_length", "elements"])
            for a in stats.arbors:
                name = "apical" if a.lineage == APICAL else "basal"
                w.writerow([a.root, name, a.branch_points, repr(a.total_length), a.elements])
        return [swc, table]


def run(params: PyramidalParams, seed: int = 0, threads: int = 1, steps: int = 500, every=None, check=None) -> PyramidalRun:
    """Grow one neuron.  ``check(sim)`` is called every ``every`` steps when given."""
    sim, series, soma = build(params, seed, threads)
    if every and check is not None:
        done = 0
        while done < steps:
            n = min(every, steps - done)
            sim.simulate(n)
            done += n
            check(sim)
    else:
        sim.simulate(steps)
    sim.close()
    return PyramidalRun(params, series, sim, soma)
