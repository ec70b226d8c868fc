import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentsim import (
    Agent,
    Behavior,
    EventKind,
    FunctionBehavior,
    ModelError,
    NewAgentEvent,
    Operation,
    OpKind,
    Simulation,
)


def volume(d):
    return math.pi / 6.0 * d**3


def test_first_agent_gets_id_zero():
    sim = Simulation()
    assert sim.add_agent(Agent((0, 0, 0), 10.0)) == 0
    assert sim.population == 1


def test_identical_payloads_get_distinct_ids():
    sim = Simulation()
    a = sim.add_agent(Agent((1, 2, 3), 5.0))
    b = sim.add_agent(Agent((1, 2, 3), 5.0))
    assert a != b


@pytest.mark.parametrize("pos,d", [((0, 0, 0), 0.0), ((0, 0, 0), -1.0), ((np.nan, 0, 0), 1.0), ((np.inf, 0, 0), 1.0)])
def test_invalid_geometry_rejected(pos, d):
    with pytest.raises(ValueError):
        Simulation().add_agent(Agent(pos, d))


def test_ids_never_reused_after_removal():
    sim = Simulation()
    a = sim.add_agent(Agent((0, 0, 0), 1.0))
    sim.remove_agent(a)
    b = sim.add_agent(Agent((0, 0, 0), 1.0))
    assert b != a and sim.population == 1


def test_agent_added_mid_step_is_visible_next_step():
    sim = Simulation(min_box_size=20)
    seen = []

    def spawn(agent, s):
        if s.step == 0:
            s.add_agent(Agent((1, 0, 0), 1.0))
        seen.append((s.step, s.neighbors(agent.id, 10.0)))

    sim.add_agent(Agent((0, 0, 0), 1.0, behaviors=[FunctionBehavior(spawn)]))
    sim.simulate(2)
    assert seen[0] == (0, [])
    assert seen[1] == (1, [1])


def test_remove_excludes_agent_from_queries():
    sim = Simulation(min_box_size=10)
    a = sim.add_agent(Agent((0, 0, 0), 1.0))
    b = sim.add_agent(Agent((1, 0, 0), 1.0))
    assert sim.neighbors(a, 5.0) == [b]
    sim.remove_agent(b)
    assert sim.neighbors(a, 5.0) == []
    assert sim.population == 1


def test_double_removal_warns_once(caplog):
    sim = Simulation()
    a = sim.add_agent(Agent((0, 0, 0), 1.0))
    keep = sim.add_agent(Agent((5, 0, 0), 1.0))
    with caplog.at_level(logging.WARNING):
        sim.remove_agent(a)
        sim.remove_agent(a)
    assert sim.population == 1 and sim.store.is_live(keep)
    assert sum("not live" in r.message for r in caplog.records) == 1


def test_duplicate_removal_inside_step_counts_once(caplog):
    sim = Simulation()

    def die_twice(agent, s):
        s.remove_agent(agent.id)
        s.remove_agent(agent.id)

    sim.add_agent(Agent((0, 0, 0), 1.0, behaviors=[FunctionBehavior(die_twice)]))
    sim.add_agent(Agent((9, 0, 0), 1.0))
    with caplog.at_level(logging.WARNING):
        report = sim.simulate(1)
    assert sim.population == 1 and report.deaths == 1


def test_division_halves_volume():
    sim = Simulation()
    p = sim.add_agent(Agent((0, 0, 0), 10.0))
    d = sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {"ratio": 0.5, "axis": (1, 0, 0)}))
    a, b = sim.agent(p), sim.agent(d)
    assert a.diameter == pytest.approx(10 * 0.5 ** (1 / 3))
    assert b.diameter == pytest.approx(7.937, abs=1e-3)
    assert a.volume + b.volume == pytest.approx(volume(10.0), rel=1e-12)
    # spheres touch
    assert np.linalg.norm(a.position - b.position) == pytest.approx((a.diameter + b.diameter) / 2)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
def test_division_ratio_outside_open_interval(ratio):
    sim = Simulation()
    p = sim.add_agent(Agent((0, 0, 0), 10.0))
    with pytest.raises(ValueError):
        sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {"ratio": ratio}))


def test_event_on_dead_parent():
    sim = Simulation()
    p = sim.add_agent(Agent((0, 0, 0), 10.0))
    sim.remove_agent(p)
    with pytest.raises(ModelError):
        sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {}))


@given(st.booleans(), st.booleans())
def test_behavior_flag_truth_table(copy, remove):
    sim = Simulation()
    b = Behavior(
        copy_on=[EventKind.CELL_DIVISION] if copy else [],
        remove_on=[EventKind.CELL_DIVISION] if remove else [],
    )
    other = Behavior()
    p = sim.add_agent(Agent((0, 0, 0), 10.0, behaviors=[b, other]))
    d = sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {"axis": (0, 0, 1)}))
    daughter = sim.agent(d).behaviors
    parent = sim.agent(p).behaviors
    assert (len(daughter) == 1) == copy
    assert (b in parent) == (not remove)
    assert other in parent and other not in daughter


def test_event_touches_only_parent_and_daughter():
    sim = Simulation()
    p = sim.add_agent(Agent((0, 0, 0), 10.0))
    bystander = sim.add_agent(Agent((50, 0, 0), 8.0))
    before = sim.store.snapshot()
    sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {"axis": (1, 0, 0)}))
    row = sim.store.row(bystander)
    assert np.array_equal(sim.store["position"][row], before["position"][row])
    assert sim.store["diameter"][row] == before["diameter"][row]


def test_zero_steps_leave_population():
    sim = Simulation()
    sim.add_agent(Agent((0, 0, 0), 1.0))
    report = sim.simulate(0)
    assert report.population == 1 and report.steps == 0


def test_division_every_step_doubles():
    sim = Simulation()

    def divide(agent, s):
        s.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, agent.id, {}))

    b = FunctionBehavior(divide, copy_on=[EventKind.CELL_DIVISION])
    sim.add_agent(Agent((0, 0, 0), 10.0, behaviors=[b]))
    report = sim.simulate(3)
    assert report.population == 8
    assert sum(a.volume for a in sim.agents()) == pytest.approx(volume(10.0), rel=1e-12)


def test_frequency_two_runs_half_the_steps():
    sim = Simulation()
    calls = []
    sim.add_operation(Operation("tick", lambda s: calls.append(s.step), OpKind.STANDALONE, frequency=2))
    sim.simulate(10)
    assert calls == [0, 2, 4, 6, 8]


def test_agent_op_runs_once_per_agent():
    sim = Simulation(behaviors_op=False)
    seen = []
    sim.add_operation(Operation("visit", lambda s, a: seen.append(a.id), OpKind.AGENT))
    for k in range(5):
        sim.add_agent(Agent((k * 3.0, 0, 0), 1.0))
    sim.simulate(2)
    assert seen == [0, 1, 2, 3, 4] * 2


def test_model_error_carries_step_and_agent():
    sim = Simulation()

    def boom(agent, s):
        if s.step == 2 and agent.id == 1:
            raise RuntimeError("bad")

    b = FunctionBehavior(boom)
    sim.add_agent(Agent((0, 0, 0), 1.0, behaviors=[b]))
    sim.add_agent(Agent((5, 0, 0), 1.0, behaviors=[b]))
    with pytest.raises(ModelError) as err:
        sim.simulate(5)
    assert err.value.step == 2 and err.value.agent_id == 1


def test_no_operations_is_an_error():
    sim = Simulation(behaviors_op=False)
    with pytest.raises(ValueError):
        sim.simulate(1)


def _random_walk_positions(seed, threads):
    sim = Simulation(seed=seed, threads=threads)

    def jiggle(agent, s):
        agent.position = agent.position + s.rng.normal(size=3)

    b = FunctionBehavior(jiggle)
    for k in range(20):
        sim.add_agent(Agent((k * 2.0, 0, 0), 1.0, behaviors=[b]))
    sim.simulate(5)
    sim.close()
    return sim.store["position"].copy()


def test_same_seed_same_positions():
    assert np.array_equal(_random_walk_positions(7, 1), _random_walk_positions(7, 1))
    assert not np.array_equal(_random_walk_positions(7, 1), _random_walk_positions(8, 1))


def test_fixed_thread_count_reproducible():
    assert np.array_equal(_random_walk_positions(3, 3), _random_walk_positions(3, 3))


def test_snapshot_reads_step_start_state():
    sim = Simulation()
    reads = []

    def move_and_read(agent, s):
        agent.position = agent.position + 1.0
        reads.append(float(s.snapshot["position"][agent.row, 0]))

    b = FunctionBehavior(move_and_read)
    sim.add_agent(Agent((0, 0, 0), 1.0, behaviors=[b]))
    sim.simulate(2)
    assert reads == [0.0, 1.0]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_population_accounting(plan):
    """Live count after a step = before + births - deaths."""
    sim = Simulation()

    def act(agent, s):
        spawn, die = plan[agent.id]
        if spawn:
            s.add_agent(Agent(agent.position + 1.0, 1.0))
        if die:
            s.remove_agent(agent.id)

    b = FunctionBehavior(act)
    for k in range(len(plan)):
        sim.add_agent(Agent((3.0 * k, 0, 0), 1.0, behaviors=[b]))
    before = sim.population
    report = sim.simulate(1)
    births = sum(s for s, _ in plan)
    deaths = sum(d for _, d in plan)
    assert report.population == before + births - deaths
    assert report.births == births and report.deaths == deaths


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1.0, 50.0))
def test_division_conserves_volume_property(ratio, d):
    sim = Simulation(seed=1)
    p = sim.add_agent(Agent((0, 0, 0), d))
    c = sim.apply_event(NewAgentEvent(EventKind.CELL_DIVISION, p, {"ratio": ratio}))
    total = sim.agent(p).volume + sim.agent(c).volume
    assert abs(total - volume(d)) <= 1e-12 * volume(d)
    assert sim.agent(c).volume == pytest.approx(ratio * volume(d), rel=1e-12)
