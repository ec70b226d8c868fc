"""Pairwise contact forces and overdamped position updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModelError, OpKind, Operation, Shape, Simulation


@dataclass
class MechanicsParams:
    """Linear spring repulsion with short-range linear adhesion.

    ``adhesion`` defaults to 0.4 times ``stiffness``.
    """

    stiffness: float = 10.0
    adhesion: float | None = None
    adhesion_range: float = 0.2
    viscosity: float = 1.0
    max_displacement: float = 3.0

    def __post_init__(self):
        if self.adhesion is None:
            self.adhesion = 0.4 * self.stiffness
        if self.stiffness <= 0 or self.viscosity <= 0 or self.max_displacement <= 0:
            raise ValueError("stiffness, viscosity and max_displacement must be positive")
        if self.adhesion < 0 or self.adhesion_range < 0:
            raise ValueError("adhesion parameters must be non-negative")


@dataclass
class ContactForce:
    force: np.ndarray
    overlap: float


def _tie_axis(id_a: np.ndarray, id_b: np.ndarray) -> np.ndarray:
    """Unit axis for coincident centers: x/y/z by the lower id, signed so a < b gets +."""
    low = np.minimum(id_a, id_b)
    axis = np.zeros((len(low), 3))
    axis[np.arange(len(low)), low % 3] = 1.0
    sign = np.where(id_a < id_b, 1.0, -1.0)
    return axis * sign[:, None]


def contact_forces(pa, pb, ra, rb, id_a, id_b, params: MechanicsParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized force on the first body of each pair and the overlap ``delta``."""
    pa = np.atleast_2d(np.asarray(pa, dtype=float))
    pb = np.atleast_2d(np.asarray(pb, dtype=float))
    id_a = np.atleast_1d(np.asarray(id_a, dtype=np.int64))
    id_b = np.atleast_1d(np.asarray(id_b, dtype=np.int64))
    d = pa - pb
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    delta = np.asarray(ra, dtype=float) + np.asarray(rb, dtype=float) - dist
    with np.errstate(invalid="ignore", divide="ignore"):
        u = d / dist[:, None]
    coincident = dist == 0.0
    if coincident.any():
        u[coincident] = _tie_axis(id_a[coincident], id_b[coincident])
    mag = np.where(
        delta > 0.0,
        params.stiffness * delta,
        np.where(delta > -params.adhesion_range, params.adhesion * delta, 0.0),
    )
    return mag[:, None] * u, delta


def sphere_sphere_force(a, b, params: MechanicsParams | None = None) -> ContactForce:
    """Force exerted on sphere ``a`` by sphere ``b``.

    ``a`` and ``b`` need ``position`` and ``diameter``; an ``id`` attribute, when
    present, drives the tie-break for coincident centers.
    """
    params = params or MechanicsParams()
    id_a = getattr(a, "id", 0)
    id_b = getattr(b, "id", 1)
    f, delta = contact_forces(
        a.position, b.position, a.diameter / 2, b.diameter / 2, id_a, id_b, params
    )
    return ContactForce(f[0], float(delta[0]))


def closest_on_segments(points, proximal, distal) -> np.ndarray:
    """Closest point on each segment ``proximal -> distal`` to each point."""
    points = np.atleast_2d(points)
    proximal = np.atleast_2d(proximal)
    axis = np.atleast_2d(distal) - proximal
    len2 = np.einsum("ij,ij->i", axis, axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("ij,ij->i", points - proximal, axis) / len2
    t = np.where(len2 > 0, np.clip(t, 0.0, 1.0), 0.0)
    return proximal + t[:, None] * axis


def sphere_cylinder_forces(centers, sphere_d, proximal, distal, cyl_d, id_s, id_c, params):
    """Vectorized force on each sphere from each cylinder (reaction is the negative)."""
    q = closest_on_segments(centers, proximal, distal)
    return contact_forces(centers, q, np.asarray(sphere_d) / 2, np.asarray(cyl_d) / 2, id_s, id_c, params)


def sphere_cylinder_force(sphere, proximal, distal, cyl_diameter, params=None, cyl_id=1) -> ContactForce:
    """Force on ``sphere`` from a cylinder given by its axis endpoints.

    The sphere interacts with the closest point of the axis segment as if that
    point were a sphere of the cylinder's diameter.  A zero-length segment is a
    sphere at ``proximal``.  The reaction belongs to the cylinder's distal point.
    """
    params = params or MechanicsParams()
    f, delta = sphere_cylinder_forces(
        np.asarray(sphere.position, float), sphere.diameter,
        np.asarray(proximal, float), np.asarray(distal, float), cyl_diameter,
        getattr(sphere, "id", 0), cyl_id, params,
    )
    return ContactForce(f[0], float(delta[0]))


def _same_neuron(sim: Simulation, rows_a, rows_b) -> np.ndarray:
    if not sim.store.has("neuron"):
        return np.zeros(len(rows_a), dtype=bool)
    neuron = sim.snapshot["neuron"]
    na, nb = neuron[rows_a], neuron[rows_b]
    return (na >= 0) & (na == nb)


def compute_displacements(sim: Simulation, rows: np.ndarray, params: MechanicsParams, skip_stationary: bool = True):
    """Overdamped displacement for each sphere in ``rows``.

    Forces come from the step-start snapshot.  Agents in stationary regions and
    non-spheres get zero displacement.
    """
    snap = sim.snapshot
    grid = sim.grid
    pos, diam, ids = snap["position"], snap["diameter"], snap["id"]
    shape = snap["shape"]
    rows = np.asarray(rows, dtype=np.int64)
    disp = np.zeros((len(rows), 3))
    active = shape[rows] == Shape.SPHERE
    if skip_stationary and sim.detect_stationary:
        active &= ~grid.stationary_rows()[rows]
    act_rows = rows[active]
    if len(act_rows) == 0:
        return disp
    i, j = grid.neighbor_pairs(grid.box_length, rows=act_rows, positions=pos, sort=False)
    force = np.zeros((sim.store.n, 3))
    ss = shape[j] == Shape.SPHERE
    si, sj = i[ss], j[ss]
    f, _ = contact_forces(pos[si], pos[sj], diam[si] / 2, diam[sj] / 2, ids[si], ids[sj], params)
    _check_finite(f, ids[si], ids[sj], sim)
    for k in range(3):
        force[:, k] += np.bincount(si, weights=f[:, k], minlength=sim.store.n)
    cyl = (shape[j] == Shape.CYLINDER) & ~_same_neuron(sim, i, j)
    if cyl.any() and "proximal" in snap:
        ci, cj = i[cyl], j[cyl]
        f, _ = sphere_cylinder_forces(
            pos[ci], diam[ci], snap["proximal"][cj], snap["distal"][cj], diam[cj],
            ids[ci], ids[cj], params,
        )
        _check_finite(f, ids[ci], ids[cj], sim)
        for k in range(3):
            force[:, k] += np.bincount(ci, weights=f[:, k], minlength=sim.store.n)
    d = force[act_rows] / params.viscosity * sim.dt
    norm = np.sqrt(np.einsum("ij,ij->i", d, d))
    over = norm > params.max_displacement
    d[over] *= (params.max_displacement / norm[over])[:, None]
    disp[active] = d
    return disp


def _check_finite(f, ids_a, ids_b, sim):
    bad = ~np.all(np.isfinite(f), axis=1)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ModelError(
            f"non-finite contact force between agents {int(ids_a[k])} and {int(ids_b[k])}",
            sim.step, int(ids_a[k]),
        )


class MechanicalForces:
    """Agent operation: sum contact forces and move spheres overdamped."""

    def __init__(self, params: MechanicsParams | None = None, skip_stationary: bool = True):
        self.params = params or MechanicsParams()
        self.skip_stationary = skip_stationary

    def __call__(self, sim: Simulation, rows: np.ndarray) -> None:
        disp = compute_displacements(sim, rows, self.params, self.skip_stationary)
        sim.store["position"][rows] += disp

    def install(self, sim: Simulation, name: str = "mechanical_forces") -> Operation:
        sim.box_margin = max(sim.box_margin, self.params.adhesion_range)
        return sim.add_operation(Operation(name, self, OpKind.AGENT, batched=True))


def overlap_energy(positions, diameters, stiffness: float = 1.0) -> float:
    """Sum of ``k * delta**2 / 2`` over overlapping sphere pairs (brute force)."""
    p = np.asarray(positions, float)
    r = np.asarray(diameters, float) / 2
    iu, ju = np.triu_indices(len(p), 1)
    delta = r[iu] + r[ju] - np.linalg.norm(p[iu] - p[ju], axis=1)
    delta = np.clip(delta, 0, None)
    return float(0.5 * stiffness * np.sum(delta**2))
