import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentsim import Behavior, EventKind, ModelError, Simulation
from agentsim import neuro
from agentsim.neuro import (
    NeuroParams,
    NeuriteMechanics,
    add_soma,
    branch_terminal,
    check_tree,
    daughters,
    element_forces,
    elongate_terminal,
    extend_new_neurite,
    read_swc,
    to_swc,
    write_swc,
)


def neuron(params=None, **kw):
    sim = Simulation(behaviors_op=False, **kw)
    neuro.install_neuro(sim, params or NeuroParams())
    soma = add_soma(sim, (0, 0, 0), 10.0)
    return sim, soma


def test_root_geometry():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0, "apical")
    el = sim.agent(root)
    assert np.allclose(el["proximal"], [0, 0, 5])
    assert np.allclose(el["distal"], [0, 0, 5.5])
    assert el["length"] == pytest.approx(0.5)
    assert bool(el["main_branch"])


def test_four_roots():
    sim, soma = neuron()
    extend_new_neurite(sim, soma, (0, 0, 1), 2.0, "apical")
    for d in ((1, 0, -0.5), (-0.5, 0.87, -0.5), (-0.5, -0.87, -0.5)):
        extend_new_neurite(sim, soma, d, 1.5, "basal")
    assert len(sim.agent(soma)["roots"]) == 4
    assert check_tree(sim) == []


def test_zero_direction_rejected():
    sim, soma = neuron()
    with pytest.raises(ValueError):
        extend_new_neurite(sim, soma, (0, 0, 0), 2.0)


def test_behavior_copied_to_new_root():
    sim, soma = neuron()
    b = Behavior(copy_on=[EventKind.NEURITE_EXTENSION])
    sim.agent(soma).behaviors.append(b)
    root = extend_new_neurite(sim, soma, (1, 0, 0), 2.0)
    assert len(sim.agent(root).behaviors) == 1


def test_elongation_kinematics():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    elongate_terminal(sim, root, 1.0, (0, 0, 1))
    assert sim.agent(root)["length"] == pytest.approx(1.5)
    assert sim.agent(root)["resting_length"] == pytest.approx(1.5)


def test_taper_over_ten_micrometers():
    sim, soma = neuron(NeuroParams(max_length=100.0))
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    for _ in range(10):
        elongate_terminal(sim, root, 1.0, (0, 0, 1), taper_rate=0.01)
    assert sim.agent(root).diameter == pytest.approx(1.9)


def test_no_growth_at_min_diameter():
    sim, soma = neuron(NeuroParams(min_diameter=0.5))
    root = extend_new_neurite(sim, soma, (0, 0, 1), 0.6)
    elongate_terminal(sim, root, 1.0, (0, 0, 1), taper_rate=0.5)
    assert sim.agent(root).diameter == 0.5
    before = sim.agent(root)["length"]
    elongate_terminal(sim, root, 1.0, (0, 0, 1))
    assert sim.agent(root)["length"] == before


def test_elongating_non_terminal_is_error():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(1, 0, 1), (-1, 0, 1)])
    with pytest.raises(ModelError):
        elongate_terminal(sim, root, 1.0, (0, 0, 1))


def test_long_element_splits_and_stays_connected():
    sim, soma = neuron(NeuroParams(max_length=10.0))
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    for _ in range(10):
        tip = root
        while daughters(sim, tip):
            tip = daughters(sim, tip)[0]
        elongate_terminal(sim, tip, 1.5, (0, 0.2, 1))
    assert len(daughters(sim, root)) == 1
    assert check_tree(sim) == []
    lengths = [sim.agent(e)["length"] for e in neuro.arbor_elements(sim, root)]
    assert max(lengths) <= 10.0 + 1e-9


def test_bifurcation():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0, "apical")
    a, b = branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(0.2, 0, 1), (-1, 0, 0.5)])
    assert sorted(daughters(sim, root)) == sorted([a, b])
    assert not neuro.is_terminal(sim, root)
    assert sim.agent(a).diameter == pytest.approx(1.4)
    # the daughter closer to the parent axis keeps the main branch
    assert bool(sim.agent(a)["main_branch"]) and not bool(sim.agent(b)["main_branch"])
    assert check_tree(sim) == []


def test_basal_bifurcation_has_no_main_branch():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (1, 0, 0), 2.0, "basal")
    ids = branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(1, 1, 0), (1, -1, 0)])
    assert not any(bool(sim.agent(i)["main_branch"]) for i in ids)


def test_third_daughter_rejected():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(1, 0, 1), (-1, 0, 1)])
    with pytest.raises((ValueError, ModelError)):
        branch_terminal(sim, root, EventKind.NEURITE_SIDE_BRANCH, [(0, 1, 0)])
    with pytest.raises((ValueError, ModelError)):
        branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(0, 1, 0), (0, -1, 0)])


def test_side_branch_fills_free_slot():
    sim, soma = neuron(NeuroParams(max_length=2.0))
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    elongate_terminal(sim, root, 2.0, (0, 0, 1))  # splits
    (child,) = daughters(sim, root)
    side = branch_terminal(sim, root, EventKind.NEURITE_SIDE_BRANCH, [(1, 0, 0)])
    assert sorted(daughters(sim, root)) == sorted([child, side])
    assert check_tree(sim) == []


def _forces(sim):
    sim.snapshot = sim.store.snapshot()
    rows = np.flatnonzero(sim.store["shape"] == neuro.Shape.CYLINDER)
    return rows, element_forces(sim, rows)


def test_chain_at_rest_has_no_force():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(1, 0, 1), (-1, 0, 1)])
    _, f = _forces(sim)
    assert np.allclose(f, 0.0)


def test_stretched_element_pulls_back():
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0)
    sim.agent(root)["distal"] = np.array([0, 0, 6.0])
    _, f = _forces(sim)
    assert np.allclose(f[0], [0, 0, -10.0])


def test_stretched_chain_relaxes():
    sim, soma = neuron(NeuroParams(max_length=100.0, viscosity=20.0))
    NeuriteMechanics().install(sim)
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0, length=2.0)
    # build a straight three element chain
    a = root
    b = neuro._new_element(sim, sim.agent(a)["distal"].copy(), np.array([0, 0, 1.0]), 2.0, 2.0, a, soma, 2, False)
    sim.agent(a)["daughters"] = [b, -1]
    c = neuro._new_element(sim, sim.agent(b)["distal"].copy(), np.array([0, 0, 1.0]), 2.0, 2.0, b, soma, 2, False)
    sim.agent(b)["daughters"] = [c, -1]
    # stretch the middle one
    sim.agent(b)["distal"] = sim.agent(b)["distal"] + [0, 0, 2.0]
    sim.agent(c)["distal"] = sim.agent(c)["distal"] + [0, 0, 2.0]
    neuro.sync_geometry(sim)
    for _ in range(500):
        sim.simulate(1)
    strains = [abs(sim.agent(e)["length"] / sim.agent(e)["resting_length"] - 1) for e in (a, b, c)]
    assert max(strains) < 1e-3
    assert check_tree(sim) == []


def test_swc_round_trip(tmp_path):
    sim, soma = neuron()
    root = extend_new_neurite(sim, soma, (0, 0, 1), 2.0, "apical")
    extend_new_neurite(sim, soma, (1, 0, -1), 1.5, "basal")
    branch_terminal(sim, root, EventKind.NEURITE_BIFURCATION, [(0.3, 0.1, 1), (-1, 0.2, 1)])
    nodes = to_swc(sim, soma)
    write_swc(nodes, tmp_path / "n.swc")
    assert read_swc(tmp_path / "n.swc") == nodes
    assert nodes[0].parent == -1 and nodes[0].type == 1
    assert {n.type for n in nodes[1:]} == {3, 4}
    assert len(nodes) == 1 + 4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 60))
def test_random_growth_keeps_tree_invariants(seed, steps):
    rng = np.random.default_rng(seed)
    sim, soma = neuron(NeuroParams(max_length=4.0))
    extend_new_neurite(sim, soma, (0, 0, 1), 3.0, "apical")
    extend_new_neurite(sim, soma, (0, 1, -1), 2.0, "basal")
    for _ in range(steps):
        store = sim.store
        cyl = store.ids[(store["shape"] == neuro.Shape.CYLINDER)]
        terms = [int(e) for e in cyl if neuro.is_terminal(sim, int(e)) and sim.agent(int(e)).diameter > 0.5]
        if not terms:
            break
        e = terms[rng.integers(len(terms))]
        if rng.random() < 0.15:
            branch_terminal(sim, e, EventKind.NEURITE_BIFURCATION, rng.normal(size=(2, 3)) + [0, 0, 2])
        else:
            elongate_terminal(sim, e, 1.0, rng.normal(size=3) + [0, 0, 1], taper_rate=0.01)
    assert check_tree(sim) == []
    cyl = sim.store.ids[sim.store["shape"] == neuro.Shape.CYLINDER]
    main = [int(e) for e in cyl if bool(sim.agent(int(e))["main_branch"])]
    # main-branch elements form one path ending in a single terminal
    ends = 0
    for e in main:
        n_main = sum(bool(sim.agent(d)["main_branch"]) for d in daughters(sim, e))
        assert n_main <= 1
        ends += n_main == 0
    assert ends == 1
