"""Neuron somata and neurite elements.

A neurite is a binary tree of cylinders.  Each element is a spring whose
point mass sits at its distal end; its proximal end is the distal end of its
mother (or a point on the soma surface for roots).  Tree changes (new roots,
splits, branches) are creation events so behaviors propagate through the
usual copy/remove flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Agent,
    EventKind,
    ModelError,
    NewAgentEvent,
    Operation,
    OpKind,
    Shape,
    Simulation,
)
from .mechanics import MechanicsParams, sphere_cylinder_forces

APICAL = 1
BASAL = 2
LINEAGES = {"apical": APICAL, "basal": BASAL}
SWC_TYPES = {APICAL: 4, BASAL: 3}


@dataclass
class NeuroParams:
    max_length: float = 10.0
    spring_constant: float = 10.0
    branch_ratio: float = 0.7
    min_diameter: float = 0.5
    taper_rate: float = 0.0
    initial_length: float = 0.5
    viscosity: float = 100.0
    max_displacement: float = 3.0


def install_neuro(sim: Simulation, params: NeuroParams | None = None) -> NeuroParams:
    """Declare neurite columns and register event handlers (idempotent)."""
    if "neuro" in sim.params:
        return sim.params["neuro"]
    params = params or NeuroParams()
    sim.params["neuro"] = params
    sim.declare_attribute("proximal", float, 0.0, width=3)
    sim.declare_attribute("distal", float, 0.0, width=3)
    sim.declare_attribute("resting_length", float, 0.0)
    sim.declare_attribute("spring_k", float, params.spring_constant)
    sim.declare_attribute("mother", np.int64, -1)
    sim.declare_attribute("daughters", np.int64, -1, width=2)
    sim.declare_attribute("neuron", np.int64, -1)
    sim.declare_attribute("lineage", np.int8, 0)
    sim.declare_attribute("main_branch", bool, False)
    sim.declare_attribute("anchor", float, 0.0, width=3)
    sim.declare_attribute("roots", object, list)
    sim.event_handlers[EventKind.NEURITE_EXTENSION] = _on_extension
    sim.event_handlers[EventKind.NEURITE_BIFURCATION] = _on_bifurcation
    sim.event_handlers[EventKind.NEURITE_SIDE_BRANCH] = _on_side_branch
    sim.barrier_hooks.append(sync_geometry)
    return params


def _params(sim: Simulation) -> NeuroParams:
    return install_neuro(sim)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if not math.isfinite(n) or n == 0.0:
        raise ValueError("direction must be a non-zero finite vector")
    return v / n


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def add_soma(sim: Simulation, position, diameter: float, behaviors=()) -> int:
    install_neuro(sim)
    soma_id = sim.add_agent(Agent(position, diameter, Shape.SPHERE, list(behaviors)))
    sim.agent(soma_id)["neuron"] = soma_id
    return soma_id


def is_terminal(sim: Simulation, element_id: int) -> bool:
    return bool(np.all(sim.agent(element_id)["daughters"] < 0))


def daughters(sim: Simulation, element_id: int) -> list[int]:
    return [int(d) for d in sim.agent(element_id)["daughters"] if d >= 0]


def axis_of(sim: Simulation, element_id: int) -> np.ndarray:
    a = sim.agent(element_id)
    return _unit(a["distal"] - a["proximal"])


def _new_element(sim, proximal, direction, length, diameter, mother, neuron, lineage, main, anchor=None) -> int:
    p = _params(sim)
    distal = proximal + direction * length
    attrs = {
        "proximal": proximal,
        "distal": distal,
        "resting_length": length,
        "spring_k": p.spring_constant,
        "mother": mother,
        "neuron": neuron,
        "lineage": lineage,
        "main_branch": main,
    }
    if anchor is not None:
        attrs["anchor"] = anchor
    new_id = sim._insert(Agent(0.5 * (proximal + distal), diameter, Shape.CYLINDER, [], attrs))
    sim.agent(new_id)["length"] = length
    return new_id


def extend_new_neurite(sim: Simulation, soma_id: int, direction, diameter: float, lineage="basal", length=None):
    """Grow a root element out of the soma surface along ``direction``."""
    p = _params(sim)
    u = _unit(direction)
    if diameter <= p.min_diameter:
        raise ValueError("initial neurite diameter must exceed the minimal diameter")
    params = {
        "direction": u,
        "diameter": float(diameter),
        "lineage": LINEAGES.get(lineage, lineage),
        "length": p.initial_length if length is None else float(length),
    }
    return sim.apply_event(NewAgentEvent(EventKind.NEURITE_EXTENSION, soma_id, params))


def _on_extension(sim: Simulation, event: NewAgentEvent) -> list[int]:
    parent = sim.agent(event.parent)
    if parent.shape is Shape.SPHERE:
        q = event.parameters
        u = _unit(q["direction"])
        proximal = parent.position + u * parent.diameter / 2
        lineage = int(q["lineage"])
        new_id = _new_element(
            sim, proximal, u, q["length"], q["diameter"], parent.id, parent.id,
            lineage, lineage == APICAL, anchor=u,
        )
        parent["roots"].append(new_id)
        return [new_id]
    return [_split(sim, parent)]


def _split(sim: Simulation, element) -> int:
    """Cut a terminal element in half; the distal half becomes the new terminal."""
    if np.any(element["daughters"] >= 0):
        raise ModelError("only terminal elements can be split", sim.step, element.id)
    prox = element["proximal"].copy()
    dist = element["distal"].copy()
    mid = 0.5 * (prox + dist)
    half_rest = 0.5 * float(element["resting_length"])
    element["distal"] = mid
    element["resting_length"] = half_rest
    element["length"] = float(np.linalg.norm(mid - prox))
    element.position = 0.5 * (prox + mid)
    length = float(np.linalg.norm(dist - mid))
    u = _unit(dist - mid)
    new_id = _new_element(
        sim, mid, u, length, element.diameter, element.id, int(element["neuron"]),
        int(element["lineage"]), bool(element["main_branch"]),
    )
    sim.agent(new_id)["resting_length"] = half_rest
    element["daughters"] = [new_id, -1]
    return new_id


def elongate_terminal(sim: Simulation, element_id: int, speed: float, direction, taper_rate=None) -> None:
    """Advance a terminal's distal point by ``speed * dt`` along ``direction``.

    The diameter tapers by ``taper_rate`` per micrometer grown and never drops
    below the minimal diameter; an element at the minimum does not grow.
    Elements longer than the maximal length are split in two.
    """
    p = _params(sim)
    el = sim.agent(element_id)
    if el.shape is not Shape.CYLINDER or np.any(el["daughters"] >= 0):
        raise ModelError("elongation requires a terminal neurite element", sim.step, element_id)
    if el.diameter <= p.min_diameter:
        return
    u = _unit(direction)
    step = speed * sim.dt
    prox = el["proximal"]
    old = float(np.linalg.norm(el["distal"] - prox))
    el["distal"] = el["distal"] + u * step
    new = float(np.linalg.norm(el["distal"] - prox))
    el["resting_length"] = float(el["resting_length"]) + (new - old)
    el["length"] = new
    el.position = 0.5 * (prox + el["distal"])
    rate = p.taper_rate if taper_rate is None else taper_rate
    el.diameter = max(p.min_diameter, el.diameter - rate * step)
    if new > p.max_length:
        sim.apply_event(NewAgentEvent(EventKind.NEURITE_EXTENSION, element_id, {}))


def branch_terminal(sim: Simulation, element_id: int, kind: EventKind, directions, length=None):
    """Bifurcate a terminal (two directions) or side-branch a non-terminal (one)."""
    if kind not in (EventKind.NEURITE_BIFURCATION, EventKind.NEURITE_SIDE_BRANCH):
        raise ValueError(f"not a branching event: {kind}")
    p = _params(sim)
    params = {
        "directions": [_unit(d) for d in np.atleast_2d(directions)],
        "length": p.initial_length if length is None else float(length),
    }
    return sim.apply_event(NewAgentEvent(kind, element_id, params))


def _on_bifurcation(sim: Simulation, event: NewAgentEvent) -> list[int]:
    p = _params(sim)
    parent = sim.agent(event.parent)
    if parent.shape is not Shape.CYLINDER:
        raise ValueError("bifurcation requires a neurite element")
    if np.any(parent["daughters"] >= 0):
        raise ValueError(f"element {parent.id} is not terminal; cannot bifurcate")
    dirs = event.parameters["directions"]
    if len(dirs) != 2:
        raise ValueError("bifurcation needs exactly two directions")
    axis = _unit(parent["distal"] - parent["proximal"])
    main = bool(parent["main_branch"])
    keeper = int(np.argmax([float(np.dot(axis, d)) for d in dirs])) if main else -1
    diameter = parent.diameter * p.branch_ratio
    new_ids = []
    for k, d in enumerate(dirs):
        new_ids.append(_new_element(
            sim, parent["distal"].copy(), d, event.parameters["length"], diameter,
            parent.id, int(parent["neuron"]), int(parent["lineage"]), k == keeper,
        ))
    parent["daughters"] = new_ids
    return new_ids


def _on_side_branch(sim: Simulation, event: NewAgentEvent) -> list[int]:
    p = _params(sim)
    parent = sim.agent(event.parent)
    if parent.shape is not Shape.CYLINDER:
        raise ValueError("side branch requires a neurite element")
    slots = parent["daughters"]
    if np.all(slots < 0):
        raise ValueError(f"element {parent.id} is terminal; use a bifurcation")
    if np.all(slots >= 0):
        raise ValueError(f"element {parent.id} already has two daughters")
    (d,) = event.parameters["directions"][:1]
    new_id = _new_element(
        sim, parent["distal"].copy(), d, event.parameters["length"],
        parent.diameter * p.branch_ratio, parent.id, int(parent["neuron"]),
        int(parent["lineage"]), False,
    )
    slots = parent["daughters"]
    slots[int(np.flatnonzero(slots < 0)[0])] = new_id
    return [new_id]


# ---------------------------------------------------------------------------
# geometry and mechanics
# ---------------------------------------------------------------------------


def sync_geometry(sim: Simulation) -> None:
    """Re-attach every proximal end to its mother and refresh centers and lengths."""
    store = sim.store
    if store.n == 0 or not store.has("mother"):
        return
    cyl = np.flatnonzero(store["shape"] == Shape.CYLINDER)
    if len(cyl) == 0:
        return
    mrow = store.rows_of(store["mother"][cyl])
    if np.any(mrow < 0):
        bad = int(store.ids[cyl[np.flatnonzero(mrow < 0)[0]]])
        raise ModelError("neurite element lost its mother", sim.step, bad)
    is_root = store["shape"][mrow] == Shape.SPHERE
    prox = store["distal"][mrow].copy()
    r = mrow[is_root]
    prox[is_root] = store["position"][r] + store["anchor"][cyl[is_root]] * (store["diameter"][r] / 2)[:, None]
    store["proximal"][cyl] = prox
    dist = store["distal"][cyl]
    store["position"][cyl] = 0.5 * (prox + dist)
    store["length"][cyl] = np.linalg.norm(dist - prox, axis=1)


def element_forces(sim: Simulation, rows: np.ndarray, external: MechanicsParams | None = None) -> np.ndarray:
    """Force on each element's distal point mass, from the step-start snapshot."""
    snap = sim.snapshot
    rows = np.asarray(rows, dtype=np.int64)
    prox, dist = snap["proximal"], snap["distal"]
    rest = snap["resting_length"]
    if np.any(rest[rows] <= 0):
        bad = int(snap["id"][rows[np.flatnonzero(rest[rows] <= 0)[0]]])
        raise ModelError("neurite resting length must be positive", sim.step, bad)

    def tension(r):
        axis = dist[r] - prox[r]
        length = np.linalg.norm(axis, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(length[:, None] > 0, axis / length[:, None], 0.0)
        t = snap["spring_k"][r] * (length - rest[r]) / rest[r]
        return t[:, None] * u

    force = -tension(rows)
    drows = sim.store.rows_of(snap["daughters"][rows].ravel()).reshape(-1, 2)
    for k in range(2):
        has = drows[:, k] >= 0
        if has.any():
            force[has] += tension(drows[has, k])
    if external is not None and sim.grid is not None:
        force += _contact_reaction(sim, rows, external)
    return force


def _contact_reaction(sim, rows, params: MechanicsParams) -> np.ndarray:
    snap = sim.snapshot
    grid = sim.grid
    i, j = grid.neighbor_pairs(grid.box_length, rows=rows, positions=snap["position"], sort=False)
    keep = (snap["shape"][j] == Shape.SPHERE) & (snap["neuron"][j] != snap["neuron"][i])
    i, j = i[keep], j[keep]
    out = np.zeros((len(rows), 3))
    if len(i) == 0:
        return out
    f_on_sphere, _ = sphere_cylinder_forces(
        snap["position"][j], snap["diameter"][j], snap["proximal"][i], snap["distal"][i],
        snap["diameter"][i], snap["id"][j], snap["id"][i], params,
    )
    local = np.searchsorted(rows, i)
    for k in range(3):
        out[:, k] -= np.bincount(local, weights=f_on_sphere[:, k], minlength=len(rows))
    return out


class NeuriteMechanics:
    """Agent operation moving each element's distal point mass overdamped."""

    def __init__(self, contact: MechanicsParams | None = None):
        self.contact = contact

    def __call__(self, sim: Simulation, rows: np.ndarray) -> None:
        rows = rows[sim.snapshot["shape"][rows] == Shape.CYLINDER]
        if len(rows) == 0:
            return
        p = _params(sim)
        disp = element_forces(sim, rows, self.contact) / p.viscosity * sim.dt
        norm = np.linalg.norm(disp, axis=1)
        over = norm > p.max_displacement
        disp[over] *= (p.max_displacement / norm[over])[:, None]
        sim.store["distal"][rows] += disp

    def install(self, sim: Simulation, name: str = "neurite_mechanics") -> Operation:
        install_neuro(sim)
        return sim.add_operation(Operation(name, self, OpKind.AGENT, batched=True))


# ---------------------------------------------------------------------------
# tree inspection and SWC
# ---------------------------------------------------------------------------


def arbor_elements(sim: Simulation, root_id: int) -> list[int]:
    """Element ids of one arbor in depth-first order (explicit stack)."""
    out, stack = [], [root_id]
    while stack:
        e = stack.pop()
        out.append(e)
        stack.extend(reversed(daughters(sim, e)))
    return out


def check_tree(sim: Simulation, tol: float = 1e-9) -> list[str]:
    """Return a list of tree-invariant violations (empty when all hold)."""
    problems = []
    store = sim.store
    if not store.has("mother"):
        return problems
    cyl_ids = [int(i) for i in store.ids[store["shape"] == Shape.CYLINDER]]
    reached = set()
    for soma in store.ids[(store["shape"] == Shape.SPHERE) & (store["neuron"] >= 0)]:
        s = sim.agent(int(soma))
        for root in s["roots"]:
            r = sim.agent(root)
            if int(r["mother"]) != s.id:
                problems.append(f"root {root} does not point to soma {s.id}")
            gap = abs(np.linalg.norm(r["proximal"] - s.position) - s.diameter / 2)
            if gap > tol:
                problems.append(f"root {root} is {gap:g} off the soma surface")
            for e in arbor_elements(sim, root):
                if e in reached:
                    problems.append(f"element {e} reachable twice")
                reached.add(e)
                el = sim.agent(e)
                ds = daughters(sim, e)
                if len(ds) > 2:
                    problems.append(f"element {e} has more than two daughters")
                for d in ds:
                    de = sim.agent(d)
                    if int(de["mother"]) != e:
                        problems.append(f"element {d} mother mismatch")
                    gap = float(np.linalg.norm(de["proximal"] - el["distal"]))
                    if gap > tol:
                        problems.append(f"element {d} detached from {e} by {gap:g}")
    orphans = set(cyl_ids) - reached
    if orphans:
        problems.append(f"orphan elements: {sorted(orphans)[:10]}")
    return problems


@dataclass(frozen=True)
class SwcNode:
    id: int
    type: int
    x: float
    y: float
    z: float
    radius: float
    parent: int


def to_swc(sim: Simulation, soma_id: int) -> list[SwcNode]:
    """SWC nodes: the soma first, then every element's distal point depth first."""
    soma = sim.agent(soma_id)
    x, y, z = (float(v) for v in soma.position)
    nodes = [SwcNode(1, 1, x, y, z, soma.diameter / 2, -1)]
    index = {soma_id: 1}
    for root in soma["roots"]:
        for e in arbor_elements(sim, root):
            el = sim.agent(e)
            sid = len(nodes) + 1
            index[e] = sid
            x, y, z = (float(v) for v in el["distal"])
            nodes.append(SwcNode(
                sid, SWC_TYPES.get(int(el["lineage"]), 3), x, y, z,
                el.diameter / 2, index[int(el["mother"])],
            ))
    return nodes


def write_swc(nodes: list[SwcNode], path) -> None:
    with open(Path(path), "w") as fh:
        fh.write("# id type x y z radius parent\n")
        for n in nodes:
            fh.write(f"{n.id} {n.type} {n.x!r} {n.y!r} {n.z!r} {n.radius!r} {n.parent}\n")


def read_swc(path) -> list[SwcNode]:
    nodes = []
    with open(Path(path)) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            f = line.split()
            nodes.append(SwcNode(int(f[0]), int(f[1]), float(f[2]), float(f[3]), float(f[4]), float(f[5]), int(f[6])))
    return nodes
