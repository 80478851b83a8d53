import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from seterm.model_core import (PointCloud, SeedPolicy, SetClassDescriptor, SetClassKind, build_dominance_poset,
                               derive_stream, read_cloud_csv, write_cloud_csv)


def _pairwise_leq(pts):
    return np.all(pts[:, None, :] <= pts[None, :, :], axis=2)


def _transitive_reduction(leq):
    strict = leq & ~np.eye(leq.shape[0], dtype=bool)
    via = (strict.astype(int) @ strict.astype(int)) > 0
    return strict & ~via


def test_three_point_example():
    p = build_dominance_poset(PointCloud([[0.1, 0.1], [0.5, 0.5], [0.9, 0.2]]))
    nodes = {tuple(v): i for i, v in enumerate(p.node_points)}
    a, b, c = nodes[(0.1, 0.1)], nodes[(0.5, 0.5)], nodes[(0.9, 0.2)]
    assert {tuple(e) for e in p.edges} == {(a, b), (a, c)}
    assert not p.leq(b, c) and not p.leq(c, b)


def test_singleton_has_no_edges():
    p = build_dominance_poset(PointCloud([[0.3, 0.7]]))
    assert p.n == 1 and p.edges.shape == (0, 2)


def test_reachability_matches_pairwise_d3(rng):
    p = build_dominance_poset(PointCloud(rng.random((50, 3))))
    np.testing.assert_array_equal(p.reachability(), _pairwise_leq(p.node_points))


@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 4)),
              elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])))
def test_reachability_and_reduction_with_ties(pts):
    p = build_dominance_poset(PointCloud(pts))
    leq = _pairwise_leq(p.node_points)
    np.testing.assert_array_equal(p.reachability(), leq)
    red = _transitive_reduction(leq)
    got = np.zeros_like(red)
    got[p.edges[:, 0], p.edges[:, 1]] = True
    np.testing.assert_array_equal(got, red)
    # duplicates merged with multiplicities
    assert p.multiplicity.sum() == pts.shape[0]
    np.testing.assert_array_equal(p.node_points[p.node_of], pts)


def test_reachability_large_n(rng):
    p = build_dominance_poset(PointCloud(rng.random((200, 2))))
    np.testing.assert_array_equal(p.reachability(), _pairwise_leq(p.node_points))


@given(st.integers(0, 2**32 - 1))
def test_permutation_equivariance(seed):
    r = np.random.default_rng(seed)
    pts = r.random((25, 3))
    perm = r.permutation(25)
    a, b = build_dominance_poset(PointCloud(pts)), build_dominance_poset(PointCloud(pts[perm]))
    # node labels are canonical (sorted coordinates), sample maps permute consistently
    np.testing.assert_array_equal(a.node_points, b.node_points)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_array_equal(a.node_of[perm], b.node_of)


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        PointCloud([[0.5, 1.5]])
    with pytest.raises(ValueError):
        PointCloud(np.empty((0, 2)))
    with pytest.raises(ValueError):
        PointCloud([[np.nan, 0.2]])


def test_descriptor_alpha():
    assert SetClassDescriptor.lower(3).alpha == 2.0
    assert SetClassDescriptor.upper(2).alpha == 1.0
    assert SetClassDescriptor.convex2d().alpha == 0.5
    with pytest.raises(ValueError):
        SetClassDescriptor(SetClassKind.CONVEX2D, 3)


def test_seed_policy_examples():
    pol = SeedPolicy(12345)
    assert derive_stream(pol, 0, "noise") == derive_stream(pol, 0, "noise")
    assert derive_stream(pol, 0, "noise") != derive_stream(pol, 1, "noise")
    assert derive_stream(pol, 0, "noise") != derive_stream(SeedPolicy(12346), 0, "noise")


def test_seed_policy_no_collisions():
    pol = SeedPolicy(7)
    purposes = ["noise", "cloud", "eval", "labels"]
    seeds = {pol.derive(r, p) for r in range(2500) for p in purposes}
    assert len(seeds) == 10_000


def test_seed_policy_range():
    with pytest.raises(ValueError):
        SeedPolicy(-1)
    SeedPolicy(2**64 - 1).rng(0, "x").random()


def test_cloud_csv_roundtrip(tmp_path, rng):
    cloud = PointCloud(rng.random((17, 3)))
    path = tmp_path / "c.csv"
    write_cloud_csv(cloud, path)
    assert path.read_text().splitlines()[0] == "x1,x2,x3"
    np.testing.assert_array_equal(read_cloud_csv(path).points, cloud.points)
