import numpy as np
import pytest
from hypothesis import given, strategies as st

from seterm.closure import (SelectionKind, WeightedInstance, brute_force_down_set, brute_force_up_set,
                            closure_network, is_down_set, is_up_set, max_weight_down_set, max_weight_up_set)
from seterm.flow import FlowNetwork, brute_force_min_cut, max_flow, to_dimacs
from seterm.model_core import PointCloud, build_dominance_poset


def _instance(seed, n, d, grid=None):
    r = np.random.default_rng(seed)
    pts = r.random((n, d)) if grid is None else r.integers(0, grid, (n, d)) / (grid - 1)
    poset = build_dominance_poset(PointCloud(pts))
    return WeightedInstance(poset, r.uniform(-1, 1, poset.n))


def _chain():
    return build_dominance_poset(PointCloud([[0.2, 0.2], [0.6, 0.6]]))


def test_flow_single_edge():
    assert max_flow(FlowNetwork(2, 0, 1, [0], [1], [5.0])).value == pytest.approx(5.0, abs=1e-9)


def test_flow_parallel_paths():
    net = FlowNetwork(4, 0, 3, [0, 1, 0, 2], [1, 3, 2, 3], [2.0, 2.0, 3.0, 3.0])
    assert max_flow(net).value == pytest.approx(5.0, abs=1e-9)


def test_flow_rejects_infinite_path():
    with pytest.raises(ValueError):
        FlowNetwork(3, 0, 2, [0, 1], [1, 2], [np.inf, np.inf])


def test_flow_vs_brute_force_cuts():
    r = np.random.default_rng(3)
    for _ in range(300):
        n = int(r.integers(3, 13))
        order = r.permutation(n)
        tails, heads = [], []
        for i in range(n):
            for j in range(i + 1, n):
                if r.random() < 0.35:
                    tails.append(order[i])
                    heads.append(order[j])
        caps = np.round(r.uniform(0, 5, len(tails)), 3)
        s, t = int(order[0]), int(order[-1])
        net = FlowNetwork(n, s, t, tails, heads, caps)
        res = max_flow(net)
        assert res.scaled_value == res.cut_capacity
        assert abs(res.value - brute_force_min_cut(net)) <= 1e-9


def test_dimacs_format():
    inst = WeightedInstance(_chain(), [-1.0, 3.0])
    text = to_dimacs(closure_network(inst))
    lines = text.strip().splitlines()
    p = [ln for ln in lines if ln.startswith("p ")]
    assert p == ["p max 4 3"]
    assert "n 3 s" in lines and "n 4 t" in lines
    arcs = [ln.split() for ln in lines if ln.startswith("a ")]
    assert len(arcs) == 3 and all(len(a) == 4 for a in arcs)


def test_down_set_examples():
    poset = _chain()
    sel = max_weight_down_set(WeightedInstance(poset, [-0.5, -2.0]))
    assert len(sel) == 0 and sel.objective_value == 0.0
    sel = max_weight_down_set(WeightedInstance(poset, [-1.0, 3.0]))
    assert sel.indices.tolist() == [0, 1] and sel.objective_value == pytest.approx(2.0)


def test_up_set_examples():
    poset = _chain()
    assert len(max_weight_up_set(WeightedInstance(poset, [-1.0, -1.0]))) == 0
    sel = max_weight_up_set(WeightedInstance(poset, [3.0, -1.0]))
    assert sel.indices.tolist() == [0, 1] and sel.objective_value == pytest.approx(2.0)


def test_disallow_empty_picks_best_nonempty():
    inst = WeightedInstance(_chain(), [-1.0, -0.25])
    sel = max_weight_down_set(inst, allow_empty=False)
    bf = brute_force_down_set(inst, allow_empty=False)
    assert sel.objective_value == pytest.approx(bf.objective_value) == pytest.approx(-1.0)


def test_down_set_matches_brute_force_500():
    r = np.random.default_rng(11)
    for k in range(500):
        n, d = int(r.integers(1, 17)), int(r.choice([2, 3]))
        inst = _instance(int(r.integers(2**32)), n, d)
        sel, bf = max_weight_down_set(inst), brute_force_down_set(inst)
        assert abs(sel.objective_value - bf.objective_value) <= 1e-9
        np.testing.assert_array_equal(sel.nodes, bf.nodes)
        mask = np.zeros(inst.poset.n, bool)
        mask[sel.nodes] = True
        assert is_down_set(inst.poset, mask)


@given(st.integers(0, 2**32 - 1), st.integers(1, 14), st.sampled_from([2, 3]))
def test_up_set_is_down_set_of_reversed_order(seed, n, d):
    inst = _instance(seed, n, d, grid=4)
    up = max_weight_up_set(inst)
    flipped = build_dominance_poset(PointCloud(1.0 - inst.poset.node_points))
    # flipping coordinates reverses the order; map weights through the node correspondence
    idx = {tuple(p): i for i, p in enumerate(flipped.node_points)}
    perm = np.array([idx[tuple(1.0 - p)] for p in inst.poset.node_points])
    w = np.empty(inst.poset.n)
    w[perm] = inst.weights
    down = max_weight_down_set(WeightedInstance(flipped, w))
    assert abs(up.objective_value - down.objective_value) <= 1e-9
    assert sorted(perm[up.nodes].tolist()) == down.nodes.tolist()
    mask = np.zeros(inst.poset.n, bool)
    mask[up.nodes] = True
    assert is_up_set(inst.poset, mask)
    bf = brute_force_up_set(inst)
    assert abs(up.objective_value - bf.objective_value) <= 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_scaling_equivariance(seed, lam):
    inst = _instance(seed, 12, 2)
    a = max_weight_down_set(inst)
    b = max_weight_down_set(WeightedInstance(inst.poset, lam * inst.weights))
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert b.objective_value == pytest.approx(lam * a.objective_value, rel=1e-9, abs=1e-9)


def test_value_dominates_random_feasible_sets():
    r = np.random.default_rng(5)
    for _ in range(5):
        inst = _instance(int(r.integers(2**32)), 40, 2)
        best = max_weight_down_set(inst).objective_value
        reach = inst.poset.reachability()
        for _ in range(1000):
            gen = r.random(inst.poset.n) < r.random() * 0.2
            mask = reach[:, gen].any(axis=1)
            assert inst.weights[mask].sum() <= best + 1e-9


def test_selection_value_is_weight_sum():
    inst = _instance(9, 60, 3)
    sel = max_weight_down_set(inst)
    assert abs(inst.weights[sel.nodes].sum() - sel.objective_value) <= 1e-12


def test_duplicates_merge_weights():
    pts = np.array([[0.5, 0.5], [0.5, 0.5], [0.9, 0.9]])
    poset = build_dominance_poset(PointCloud(pts))
    inst = WeightedInstance.from_points(poset, [0.4, 0.4, -0.5])
    sel = max_weight_down_set(inst)
    assert sel.indices.tolist() == [0, 1] and sel.objective_value == pytest.approx(0.8)


def test_brute_force_limit():
    inst = _instance(1, 23, 2)
    if inst.poset.n > 22:
        with pytest.raises(ValueError):
            brute_force_down_set(inst)


def test_invalid_weights():
    with pytest.raises(ValueError):
        WeightedInstance(_chain(), [1.0])
    with pytest.raises(ValueError):
        WeightedInstance(_chain(), [1.0, np.inf])


def test_selection_kind_values():
    assert {k.value for k in SelectionKind} == {"down-set", "up-set", "convex-position"}
