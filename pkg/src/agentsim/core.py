"""Agent population, events, operations and the step scheduler."""

from __future__ import annotations

import copy
import enum
import logging
import math
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .grid import GridState, UniformGrid

log = logging.getLogger(__name__)

_local = threading.local()


class Shape(enum.IntEnum):
    SPHERE = 0
    CYLINDER = 1


class EventKind(enum.Enum):
    CELL_DIVISION = "cell_division"
    NEURITE_EXTENSION = "neurite_extension"
    NEURITE_BIFURCATION = "neurite_bifurcation"
    NEURITE_SIDE_BRANCH = "neurite_side_branch"


class OpKind(enum.Enum):
    AGENT = "agent"
    STANDALONE = "standalone"


class ModelError(RuntimeError):
    """Raised when a behavior or operation fails; aborts the run."""

    def __init__(self, message: str, step: int | None = None, agent_id: int | None = None):
        where = []
        if step is not None:
            where.append(f"step {step}")
        if agent_id is not None:
            where.append(f"agent {agent_id}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.step = step
        self.agent_id = agent_id


# ---------------------------------------------------------------------------
# agents and behaviors
# ---------------------------------------------------------------------------


class Behavior:
    """Per-agent rule executed once per step.

    ``copy_on`` and ``remove_on`` hold the event kinds on which the behavior is
    copied to a newly created agent and removed from the agent that triggered
    the event.

    Subclasses either override :meth:`run` (called per agent) or set
    ``batched = True`` and override :meth:`run_batch`.  A batched instance is
    shared by all agents that carry it and receives their rows in one call.
    """

    batched = False

    def __init__(self, copy_on: Iterable[EventKind] = (), remove_on: Iterable[EventKind] = ()):
        self.copy_on = frozenset(copy_on)
        self.remove_on = frozenset(remove_on)

    def run(self, agent: "AgentRef", sim: "Simulation") -> None:
        raise NotImplementedError

    def run_batch(self, sim: "Simulation", rows: np.ndarray) -> None:
        raise NotImplementedError

    def clone(self) -> "Behavior":
        return self if self.batched else copy.copy(self)


class FunctionBehavior(Behavior):
    """Wrap a plain ``fn(agent, sim)`` callable as a behavior."""

    def __init__(self, fn: Callable[["AgentRef", "Simulation"], None], copy_on=(), remove_on=()):
        super().__init__(copy_on, remove_on)
        self.fn = fn

    def run(self, agent, sim):
        self.fn(agent, sim)

    def __repr__(self):
        return f"FunctionBehavior({getattr(self.fn, '__name__', self.fn)!r})"


@dataclass
class Agent:
    """Description of an agent to insert; becomes live via ``Simulation.add_agent``."""

    position: Any
    diameter: float
    shape: Shape = Shape.SPHERE
    behaviors: list = field(default_factory=list)
    attributes: dict = field(default_factory=dict)

    def validate(self) -> None:
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError(f"agent position must be a finite 3-vector, got {self.position!r}")
        if not (math.isfinite(self.diameter) and self.diameter > 0):
            raise ValueError(f"agent diameter must be positive, got {self.diameter!r}")


@dataclass
class NewAgentEvent:
    kind: EventKind
    parent: int
    parameters: dict = field(default_factory=dict)


class AgentStore:
    """Dense column storage for live agents.

    Rows are kept in ascending id order.  Ids are never reused; dead rows are
    dropped by :meth:`compact` at step barriers.
    """

    def __init__(self):
        self._cols: dict[str, np.ndarray] = {}
        self._spec: dict[str, tuple] = {}
        self.n = 0
        self._cap = 0
        self.version = 0
        self._row_of = np.zeros(0, dtype=np.int64)
        self.behaviors: list[list[Behavior]] = []
        self.declare("id", np.int64, -1)
        self.declare("shape", np.int8, 0)
        self.declare("position", float, 0.0, width=3)
        self.declare("diameter", float, 0.0)
        self.declare("length", float, 0.0)

    # columns ---------------------------------------------------------------
    def declare(self, name: str, dtype=float, default=0.0, width: int | None = None) -> None:
        if name in self._spec:
            return
        self._spec[name] = (dtype, default, width)
        shape = (self._cap,) if width is None else (self._cap, width)
        arr = np.empty(shape, dtype=dtype)
        if dtype is object:
            arr[:] = None
        else:
            arr[...] = default
        self._cols[name] = arr
        # existing rows take the default
        if self.n and dtype is object:
            for r in range(self.n):
                arr[r] = default() if callable(default) else default

    def has(self, name: str) -> bool:
        return name in self._cols

    def __getitem__(self, name: str) -> np.ndarray:
        return self._cols[name][: self.n]

    def column_names(self) -> list[str]:
        return list(self._cols)

    # identity --------------------------------------------------------------
    @property
    def ids(self) -> np.ndarray:
        return self._cols["id"][: self.n]

    def row(self, agent_id: int) -> int:
        if 0 <= agent_id < len(self._row_of):
            r = int(self._row_of[agent_id])
            if r >= 0:
                return r
        raise KeyError(f"agent {agent_id} is not live")

    def is_live(self, agent_id: int) -> bool:
        return 0 <= agent_id < len(self._row_of) and self._row_of[agent_id] >= 0

    def rows_of(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        out = np.full(len(ids), -1, dtype=np.int64)
        ok = (ids >= 0) & (ids < len(self._row_of))
        out[ok] = self._row_of[ids[ok]]
        return out

    # growth ----------------------------------------------------------------
    def _grow(self, need: int) -> None:
        if need <= self._cap:
            return
        cap = max(need, 2 * self._cap, 64)
        for name, arr in self._cols.items():
            dtype, default, width = self._spec[name]
            shape = (cap,) if width is None else (cap, width)
            new = np.empty(shape, dtype=dtype)
            if dtype is not object:
                new[...] = default
            new[: self.n] = arr[: self.n]
            self._cols[name] = new
        self._cap = cap

    def append(self, agent_id: int, agent: Agent) -> int:
        self._grow(self.n + 1)
        r = self.n
        for name, arr in self._cols.items():
            dtype, default, width = self._spec[name]
            if dtype is object:
                arr[r] = default() if callable(default) else default
            else:
                arr[r] = default
        self._cols["id"][r] = agent_id
        self._cols["shape"][r] = int(agent.shape)
        self._cols["position"][r] = agent.position
        self._cols["diameter"][r] = agent.diameter
        for key, value in agent.attributes.items():
            if key not in self._cols:
                raise KeyError(f"unknown agent attribute {key!r}; declare the column first")
            self._cols[key][r] = value
        self.behaviors.append(list(agent.behaviors))
        if agent_id >= len(self._row_of):
            grown = np.full(max(agent_id + 1, 2 * len(self._row_of), 64), -1, dtype=np.int64)
            grown[: len(self._row_of)] = self._row_of
            self._row_of = grown
        self._row_of[agent_id] = r
        self.n += 1
        self.version += 1
        return r

    def compact(self, keep: np.ndarray) -> None:
        keep = np.asarray(keep, dtype=bool)
        if keep.all():
            return
        dead = self.ids[~keep]
        self._row_of[dead] = -1
        m = int(keep.sum())
        for name, arr in self._cols.items():
            arr[:m] = arr[: self.n][keep]
        self.behaviors = [b for b, k in zip(self.behaviors, keep) if k]
        self.n = m
        self._row_of[self.ids] = np.arange(m)
        self.version += 1

    def snapshot(self) -> dict[str, np.ndarray]:
        return {
            name: arr[: self.n].copy()
            for name, arr in self._cols.items()
            if self._spec[name][0] is not object
        }


class AgentRef:
    """Handle to one live agent; attribute access reads and writes its row."""

    __slots__ = ("sim", "id")

    def __init__(self, sim: "Simulation", agent_id: int):
        self.sim = sim
        self.id = int(agent_id)

    @property
    def row(self) -> int:
        return self.sim.store.row(self.id)

    @property
    def position(self) -> np.ndarray:
        return self.sim.store["position"][self.row]

    @position.setter
    def position(self, value) -> None:
        self.sim.store["position"][self.row] = value

    @property
    def diameter(self) -> float:
        return float(self.sim.store["diameter"][self.row])

    @diameter.setter
    def diameter(self, value: float) -> None:
        self.sim.store["diameter"][self.row] = value

    @property
    def volume(self) -> float:
        return math.pi / 6.0 * self.diameter**3

    @property
    def shape(self) -> Shape:
        return Shape(int(self.sim.store["shape"][self.row]))

    @property
    def behaviors(self) -> list[Behavior]:
        store = self.sim.store
        # the caller may edit the list; invalidate cached dispatch groups
        store.version += 1
        return store.behaviors[self.row]

    def __getitem__(self, key: str):
        return self.sim.store[key][self.row]

    def __setitem__(self, key: str, value) -> None:
        self.sim.store[key][self.row] = value

    def __eq__(self, other):
        return isinstance(other, AgentRef) and other.sim is self.sim and other.id == self.id

    def __hash__(self):
        return hash((id(self.sim), self.id))

    def __repr__(self):
        return f"AgentRef({self.id})"


# ---------------------------------------------------------------------------
# operations and scheduling
# ---------------------------------------------------------------------------


@dataclass
class Operation:
    """A unit of work executed by the scheduler.

    Agent operations run ``body(sim, agent)`` for every live agent, or
    ``body(sim, rows)`` once per worker chunk when ``batched``.  Standalone
    operations run ``body(sim)`` once per scheduled step.  ``at_end`` standalone
    operations run one extra time after the final step of ``simulate``.
    """

    name: str
    body: Callable
    kind: OpKind = OpKind.STANDALONE
    frequency: int = 1
    batched: bool = False
    at_end: bool = False
    calls: int = 0

    def __post_init__(self):
        if self.frequency < 1:
            raise ValueError("operation frequency must be a positive integer")

    def due(self, step: int) -> bool:
        return step % self.frequency == 0


@dataclass
class SimulationReport:
    steps: int
    population: int
    wall_time: float
    op_wall_times: dict[str, float]
    births: int = 0
    deaths: int = 0


class RandomStream:
    """Deterministic random substreams derived from one 64-bit seed.

    Stream ``main`` serves initialization and standalone operations; worker
    ``w`` gets its own generator so chunked agent operations stay reproducible
    for a fixed worker count.
    """

    def __init__(self, seed: int, workers: int = 1):
        self.seed = int(seed) & ((1 << 64) - 1)
        children = np.random.SeedSequence(self.seed).spawn(workers + 1)
        self.main = np.random.Generator(np.random.PCG64(children[0]))
        self.workers = [np.random.Generator(np.random.PCG64(c)) for c in children[1:]]


class _WorkerContext:
    def __init__(self, sim: "Simulation", index: int, rng: np.random.Generator):
        self.sim = sim
        self.index = index
        self.rng = rng
        self.queue: list[tuple] = []
        self.tallies: Counter = Counter()
        self.current_agent = -1


EventHandler = Callable[["Simulation", NewAgentEvent], list]


class Simulation:
    """One simulation instance: population, scheduler, grid and fields.

    Parameters
    ----------
    seed : int
        Seed for all random streams.
    dt : float
        Simulated time per step.
    threads : int
        Number of workers for agent operations.  Results are reproducible for
        a fixed value.
    min_box_size : float
        Lower bound on the uniform-grid box edge.
    epsilon_move : float
        Displacement above which an agent counts as moved for stationary flags.
    """

    def __init__(
        self,
        seed: int = 0,
        dt: float = 1.0,
        threads: int = 1,
        min_box_size: float = 0.0,
        epsilon_move: float = 1e-9,
        detect_stationary: bool = True,
        behaviors_op: bool = True,
    ):
        if threads < 1:
            raise ValueError("thread count must be >= 1")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.seed = int(seed)
        self.dt = float(dt)
        self.threads = int(threads)
        self.min_box_size = float(min_box_size)
        self.box_margin = 0.0
        self.epsilon_move = float(epsilon_move)
        self.detect_stationary = detect_stationary
        self.store = AgentStore()
        self.random = RandomStream(self.seed, self.threads)
        self._workers = [_WorkerContext(self, w, g) for w, g in enumerate(self.random.workers)]
        self._serial = _WorkerContext(self, self.threads, self.random.main)
        self.step = 0
        self.operations: list[Operation] = []
        self.params: dict[str, Any] = {}
        self.fields: dict[str, Any] = {}
        self.tallies: Counter = Counter()
        self.barrier_hooks: list[Callable[["Simulation"], None]] = []
        self.event_handlers: dict[EventKind, EventHandler] = {EventKind.CELL_DIVISION: divide_cell}
        self.grid: UniformGrid | None = None
        self.snapshot: dict[str, np.ndarray] | None = None
        self._prev_grid: GridState | None = None
        self._next_id = 0
        self._in_step = False
        self._pool: ThreadPoolExecutor | None = None
        self._births = 0
        self._deaths = 0
        self.population_trajectory: list[tuple[int, int]] = []
        if behaviors_op:
            self.add_operation(
                Operation("behaviors", run_behaviors, OpKind.AGENT, batched=True)
            )

    # ------------------------------------------------------------- context
    def _ctx(self) -> _WorkerContext | None:
        ctx = getattr(_local, "ctx", None)
        return ctx if ctx is not None and ctx.sim is self else None

    @property
    def rng(self) -> np.random.Generator:
        """Generator of the calling worker (main stream outside agent operations)."""
        ctx = self._ctx()
        return ctx.rng if ctx is not None else self.random.main

    def tally(self, key, amount: int = 1) -> None:
        ctx = self._ctx()
        if ctx is None:
            self.tallies[key] += amount
        else:
            ctx.tallies[key] += amount

    def _enqueue(self, item: tuple) -> None:
        ctx = self._ctx() or self._serial
        ctx.queue.append(item)

    def _current_agent(self) -> int:
        ctx = self._ctx()
        return ctx.current_agent if ctx is not None else -1

    # ----------------------------------------------------------- population
    @property
    def population(self) -> int:
        return self.store.n

    def agent(self, agent_id: int) -> AgentRef:
        self.store.row(agent_id)
        return AgentRef(self, agent_id)

    def agents(self) -> list[AgentRef]:
        return [AgentRef(self, int(i)) for i in self.store.ids]

    def declare_attribute(self, name: str, dtype=float, default=0.0, width: int | None = None) -> None:
        self.store.declare(name, dtype, default, width)

    def add_agent(self, agent: Agent) -> int | None:
        """Insert an agent.

        Outside a step the agent is live immediately and its id is returned.
        Inside a step the insertion is queued for the barrier and ``None`` is
        returned.
        """
        agent.validate()
        if self._in_step:
            self._enqueue(("add", self._current_agent(), agent))
            return None
        return self._insert(agent)

    def add_agents(self, agents: Iterable[Agent]) -> list[int | None]:
        return [self.add_agent(a) for a in agents]

    def _insert(self, agent: Agent) -> int:
        agent.validate()
        agent_id = self._next_id
        self._next_id += 1
        self.store.append(agent_id, agent)
        self._births += 1
        return agent_id

    def remove_agent(self, agent_id: int) -> None:
        if self._in_step:
            self._enqueue(("remove", int(agent_id), int(agent_id)))
            return
        self._remove_now([int(agent_id)])

    def _remove_now(self, ids: list[int]) -> None:
        keep = np.ones(self.store.n, dtype=bool)
        seen = set()
        for agent_id in ids:
            if agent_id in seen or not self.store.is_live(agent_id):
                log.warning("remove_agent: agent %s is not live; ignored", agent_id)
                continue
            seen.add(agent_id)
            keep[self.store.row(agent_id)] = False
        self._deaths += len(seen)
        self.store.compact(keep)

    def attach_behavior(self, agent_id: int, behavior: Behavior) -> None:
        if self._in_step:
            self._enqueue(("attach", int(agent_id), (int(agent_id), behavior)))
            return
        self.agent(agent_id).behaviors.append(behavior)

    # --------------------------------------------------------------- events
    def apply_event(self, event: NewAgentEvent):
        """Apply a creation event.

        Returns the new agent id (a tuple when the event creates several), or
        ``None`` when called inside a step, where the event is queued for the
        barrier.
        """
        if self._in_step:
            self._enqueue(("event", int(event.parent), event))
            return None
        return self._apply_event_now(event)

    def _apply_event_now(self, event: NewAgentEvent):
        if not self.store.is_live(event.parent):
            raise ModelError(f"{event.kind.value}: parent {event.parent} is not live", self.step)
        handler = self.event_handlers.get(event.kind)
        if handler is None:
            raise ModelError(f"no handler registered for event {event.kind.value}", self.step)
        parent_behaviors = self.agent(event.parent).behaviors
        snapshot = list(parent_behaviors)
        new_ids = handler(self, event)
        for new_id in new_ids:
            row = self.store.row(new_id)
            self.store.behaviors[row].extend(
                b.clone() for b in snapshot if event.kind in b.copy_on
            )
        prow = self.store.row(event.parent)
        self.store.version += 1
        self.store.behaviors[prow] = [
            b for b in self.store.behaviors[prow] if event.kind not in b.remove_on
        ]
        return new_ids[0] if len(new_ids) == 1 else tuple(new_ids)

    # ------------------------------------------------------------ operations
    def add_operation(self, op: Operation, before: str | None = None) -> Operation:
        if before is None:
            self.operations.append(op)
        else:
            idx = [o.name for o in self.operations].index(before)
            self.operations.insert(idx, op)
        return op

    def operation(self, name: str) -> Operation:
        for op in self.operations:
            if op.name == name:
                return op
        raise KeyError(name)

    def remove_operation(self, name: str) -> None:
        self.operations = [o for o in self.operations if o.name != name]

    # ------------------------------------------------------------------ grid
    def extents(self) -> np.ndarray:
        return np.maximum(self.store["diameter"], self.store["length"])

    def rebuild_grid(self) -> UniformGrid:
        ext = self.extents()
        largest = float(ext.max()) if len(ext) else 0.0
        grid = UniformGrid(
            self.store["position"], ext, max(self.min_box_size, largest + self.box_margin)
        )
        if self.detect_stationary:
            grid.mark_stationary(self.store.ids, self._prev_grid, self.epsilon_move)
        self.grid = grid
        return grid

    def neighbors(self, agent_id: int, radius: float) -> list[int]:
        """Ids of live agents within ``radius`` of ``agent_id`` (step-start grid)."""
        grid = self.grid if self.grid is not None and self._in_step else self.rebuild_grid()
        row = self.store.row(agent_id)
        return [int(self.store.ids[j]) for j in grid.neighbors(row, radius)]

    def for_each_neighbor(self, agent_id: int, radius: float, visit: Callable[[int, float], None]) -> None:
        grid = self.grid if self.grid is not None and self._in_step else self.rebuild_grid()
        row = self.store.row(agent_id)
        ids = self.store.ids
        grid.for_each_neighbor(row, radius, lambda j, d: visit(int(ids[j]), d))

    # ------------------------------------------------------------- stepping
    def _executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        return self._pool

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _run_chunk(self, ctx: _WorkerContext, op: Operation, rows: np.ndarray) -> None:
        _local.ctx = ctx
        try:
            if op.batched:
                op.body(self, rows)
            else:
                ids = self.store.ids
                for r in rows:
                    ctx.current_agent = int(ids[r])
                    op.body(self, AgentRef(self, ctx.current_agent))
                ctx.current_agent = -1
        except ModelError:
            raise
        except Exception as exc:
            agent = ctx.current_agent if ctx.current_agent >= 0 else None
            raise ModelError(f"operation {op.name!r} failed: {exc!r}", self.step, agent) from exc
        finally:
            _local.ctx = None

    def _run_agent_op(self, op: Operation) -> None:
        n = self.store.n
        if n == 0:
            return
        chunks = np.array_split(np.arange(n, dtype=np.int64), self.threads)
        if self.threads == 1:
            self._run_chunk(self._workers[0], op, chunks[0])
        else:
            futures = [
                self._executor().submit(self._run_chunk, self._workers[w], op, chunks[w])
                for w in range(self.threads)
            ]
            for f in futures:
                f.result()

    def _run_standalone(self, op: Operation) -> None:
        try:
            op.body(self)
        except ModelError:
            raise
        except Exception as exc:
            raise ModelError(f"operation {op.name!r} failed: {exc!r}", self.step) from exc

    def _barrier(self) -> None:
        merged = []
        for ctx in self._workers + [self._serial]:
            merged.extend(ctx.queue)
            ctx.queue = []
            self.tallies.update(ctx.tallies)
            ctx.tallies = Counter()
        creations = sorted(
            (m for m in merged if m[0] != "remove"), key=lambda m: m[1]
        )
        for kind, _, payload in creations:
            if kind == "add":
                self._insert(payload)
            elif kind == "event":
                self._apply_event_now(payload)
            elif kind == "attach":
                agent_id, behavior = payload
                if self.store.is_live(agent_id):
                    self.agent(agent_id).behaviors.append(behavior)
        removals = [m[2] for m in merged if m[0] == "remove"]
        if removals:
            self._remove_now(removals)
        for hook in self.barrier_hooks:
            hook(self)

    def simulate(self, n_steps: int) -> SimulationReport:
        """Advance ``n_steps`` steps and report population and timings."""
        if n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if not self.operations:
            raise ValueError("scheduler has no operations")
        times = {op.name: 0.0 for op in self.operations}
        births0, deaths0 = self._births, self._deaths
        t_start = time.perf_counter()
        if not self.population_trajectory:
            self.population_trajectory.append((self.step, self.store.n))
        for _ in range(n_steps):
            self.rebuild_grid()
            self.snapshot = self.store.snapshot()
            self._in_step = True
            try:
                for op in self.operations:
                    if not op.due(self.step):
                        continue
                    t0 = time.perf_counter()
                    if op.kind is OpKind.AGENT:
                        self._run_agent_op(op)
                    else:
                        self._run_standalone(op)
                    op.calls += 1
                    times[op.name] = times.get(op.name, 0.0) + time.perf_counter() - t0
            finally:
                self._in_step = False
            self._prev_grid = self.grid.state(self.snapshot["id"]) if self.grid is not None else None
            self._barrier()
            self.step += 1
            self.population_trajectory.append((self.step, self.store.n))
        if n_steps:
            self.snapshot = self.store.snapshot()
            for op in self.operations:
                if op.at_end and op.kind is OpKind.STANDALONE:
                    self._run_standalone(op)
        return SimulationReport(
            steps=n_steps,
            population=self.store.n,
            wall_time=time.perf_counter() - t_start,
            op_wall_times=times,
            births=self._births - births0,
            deaths=self._deaths - deaths0,
        )

    @property
    def time(self) -> float:
        return self.step * self.dt


# ---------------------------------------------------------------------------
# built-in behavior dispatch and cell division
# ---------------------------------------------------------------------------


def _dispatch_groups(sim: Simulation, rows: np.ndarray):
    store = sim.store
    key = (int(rows[0]) if len(rows) else -1, len(rows))
    cache = sim.__dict__.setdefault("_dispatch_cache", {})
    hit = cache.get(key)
    if hit is not None and hit[0] == store.version:
        return hit[1], hit[2]
    groups: dict[int, tuple[Behavior, list[int]]] = {}
    scalar_rows = []
    behaviors = store.behaviors
    for r in rows.tolist():
        has_scalar = False
        for b in behaviors[r]:
            if b.batched:
                g = groups.get(id(b))
                if g is None:
                    g = groups[id(b)] = (b, [])
                g[1].append(r)
            else:
                has_scalar = True
        if has_scalar:
            scalar_rows.append(r)
    batches = [(b, np.asarray(rs, dtype=np.int64)) for b, rs in groups.values()]
    cache[key] = (store.version, batches, scalar_rows)
    return batches, scalar_rows


def run_behaviors(sim: Simulation, rows: np.ndarray) -> None:
    """Execute attached behaviors for the given rows.

    Batched behaviors run first, one call per shared instance in order of first
    appearance; per-agent behaviors then run agent by agent in insertion order.
    """
    store = sim.store
    batches, scalar_rows = _dispatch_groups(sim, rows)
    for b, rs in batches:
        b.run_batch(sim, rs)
    ctx = sim._ctx()
    ids = store.ids
    for r in scalar_rows:
        agent_id = int(ids[r])
        if ctx is not None:
            ctx.current_agent = agent_id
        ref = AgentRef(sim, agent_id)
        for b in list(store.behaviors[r]):
            if not b.batched:
                b.run(ref, sim)
    if ctx is not None:
        ctx.current_agent = -1


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise ValueError("direction must be a non-zero finite vector")
    return v / n


def divide_cell(sim: Simulation, event: NewAgentEvent) -> list[int]:
    """Split a sphere's volume between itself and a new daughter.

    ``parameters``: ``ratio`` (daughter share of the volume, in (0, 1), default
    0.5) and ``axis`` (direction of the daughter, default random).  The two
    spheres end up touching, with their volume-weighted center unchanged.
    """
    ratio = float(event.parameters.get("ratio", 0.5))
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"division ratio must lie in (0, 1), got {ratio}")
    axis = event.parameters.get("axis")
    if axis is None:
        axis = sim.rng.normal(size=3)
    axis = _unit(axis)
    parent = sim.agent(event.parent)
    if parent.shape is not Shape.SPHERE:
        raise ValueError("cell division requires a spherical agent")
    volume = parent.volume
    v_daughter = ratio * volume
    v_parent = volume - v_daughter
    d_parent = (6.0 * v_parent / math.pi) ** (1.0 / 3.0)
    d_daughter = (6.0 * v_daughter / math.pi) ** (1.0 / 3.0)
    dist = 0.5 * (d_parent + d_daughter)
    center = parent.position.copy()
    parent.diameter = d_parent
    parent.position = center - axis * dist * ratio
    attrs = {}
    row = parent.row
    for name in sim.store.column_names():
        if name in ("id", "shape", "position", "diameter", "length"):
            continue
        if sim.store._spec[name][0] is object:
            continue
        attrs[name] = sim.store[name][row].copy() if sim.store[name].ndim > 1 else sim.store[name][row]
    daughter = Agent(center + axis * dist * (1.0 - ratio), d_daughter, Shape.SPHERE, [], attrs)
    return [sim._insert(daughter)]
