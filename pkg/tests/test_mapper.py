import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcdnpe.mapper import (
    ArrayShape,
    LayerProblem,
    NpeConfig,
    best_exec_tree,
    brute_force_min_rolls,
    create_tree,
    enumerate_configs,
    layer_events,
    schedule,
    total_rolls,
    utilization,
)

S6x3 = ArrayShape(6, 3)
S16x8 = ArrayShape(16, 8)


def _configs(pairs):
    return [NpeConfig(k, n) for k, n in pairs]


def test_configs_6x3():
    assert enumerate_configs(S6x3) == _configs([(1, 18), (2, 9), (3, 6), (6, 3)])


def test_configs_16x8():
    got = enumerate_configs(S16x8)
    assert got == _configs([(1, 128), (2, 64), (4, 32), (8, 16), (16, 8)])
    assert all(c.K * c.N == 128 and c.N >= 8 for c in got)


def test_configs_not_pruned_by_batches():
    assert enumerate_configs(S6x3, batches=1) == enumerate_configs(S6x3)


def test_small_array_best_schedule():
    p = LayerProblem(3, 50, 9)
    events = layer_events(p, S6x3)
    assert total_rolls(events) == 2
    assert utilization(events, p, S6x3) == pytest.approx(0.75)


@pytest.mark.parametrize("k,n,rolls,util", [(1, 18, 3, 0.5), (6, 3, 3, 0.5),
                                            (2, 9, 2, 0.75), (3, 6, 2, 0.75)])
def test_small_array_forced_configs(k, n, rolls, util):
    p = LayerProblem(3, 50, 9)
    events = layer_events(p, S6x3, configs=[NpeConfig(k, n)])
    assert total_rolls(events) == rolls
    assert utilization(events, p, S6x3) == pytest.approx(util)


def test_tree_for_5_by_7():
    tree = best_exec_tree(create_tree(5, 7, S6x3))
    assert tree.total_rolls() == 3 == brute_force_min_rolls(5, 7, S6x3)


def test_empty_problem():
    assert best_exec_tree(create_tree(0, 5, S6x3)) is None


def test_root_branches_one_per_config():
    root = create_tree(3, 9, S6x3)
    assert [b.config for b in root.branches] == enumerate_configs(S6x3)
    b = root.branches[1]  # NPE(2, 9)
    assert b.load == (2, 9) and b.rolls == 1
    assert (b.child_b.batches, b.child_b.neurons) == (1, 9)
    assert b.child_theta.empty


def test_mnist_schedule_b1():
    events = schedule([784, 700, 10], 1, S16x8)
    first = [e for e in events if e.layer_index == 0]
    assert [(e.config, e.load, e.rolls) for e in first] == [
        (NpeConfig(1, 128), (1, 128), 5), (NpeConfig(1, 128), (1, 60), 1)]
    assert all(e.cycles_per_roll == 785 for e in first)
    second = [e for e in events if e.layer_index == 1]
    assert total_rolls(second) == 1 and second[0].cycles_per_roll == 701


def test_conventional_cycles_per_roll():
    events = schedule([10, 20], 2, S16x8, tcd=False)
    assert {e.cycles_per_roll for e in events} == {10}


def test_passes_split_batches():
    events = schedule([4, 8], 5, S16x8, max_batches=2)
    assert sorted({e.pass_index for e in events}) == [0, 1, 2]
    assert {e.batch_offset for e in events if e.pass_index == 2} == {4}


def test_schedule_errors():
    with pytest.raises(ValueError):
        schedule([4], 1, S16x8)
    with pytest.raises(ValueError):
        schedule([4, 3], 0, S16x8)
    with pytest.raises(ValueError):
        ArrayShape(0, 3)
    with pytest.raises(ValueError):
        LayerProblem(1, 0, 1)
    with pytest.raises(ValueError):
        brute_force_min_rolls(17, 2, S6x3)


def _coverage(events, batches, neurons):
    hits = np.zeros((batches, neurons), dtype=int)
    for e in events:
        k, n = e.load
        for b0, n0 in e.roll_tiles():
            hits[b0:b0 + k, n0:n0 + n] += 1
    return hits


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.integers(1, 60))
def test_events_cover_every_neuron_once(b, t):
    events = layer_events(LayerProblem(b, 7, t), S6x3)
    assert (_coverage(events, b, t) == 1).all()
    for e in events:
        assert e.load[0] <= e.config.K and e.load[1] <= e.config.N


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 24))
def test_tree_never_beats_oracle(b, t):
    tree = best_exec_tree(create_tree(b, t, S6x3))
    assert tree.total_rolls() >= brute_force_min_rolls(b, t, S6x3)


def test_bfs_order():
    events = layer_events(LayerProblem(5, 3, 40), S6x3)
    tree = best_exec_tree(create_tree(5, 40, S6x3))
    assert (events[0].config, events[0].load, events[0].rolls) == (tree.config, tree.psi, tree.r)
