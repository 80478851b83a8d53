"""Point clouds, dominance posets, set-class descriptors and seed streams."""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence, Union

import numba
import numpy as np

__all__ = [
    "PointCloud",
    "DominancePoset",
    "SetClassKind",
    "SetClassDescriptor",
    "SeedPolicy",
    "build_dominance_poset",
    "derive_stream",
    "read_cloud_csv",
    "write_cloud_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """n points of [0, 1]^d in a fixed index order."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("a point cloud needs shape (n, d) with n >= 1, d >= 1")
        if not np.all(np.isfinite(pts)) or pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError("point coordinates must lie in [0, 1]")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def uniform(cls, n: int, dim: int, rng: np.random.Generator) -> "PointCloud":
        return cls(rng.random((n, dim)))

    def __len__(self) -> int:
        return self.n


@numba.njit(cache=True)
def _hasse_edges(pts, order):
    # order must be a linear extension of componentwise dominance
    m, d = pts.shape
    cap = 4 * m + 16
    src = np.empty(cap, dtype=np.int64)
    dst = np.empty(cap, dtype=np.int64)
    n_edges = 0
    minimal = np.empty(m, dtype=np.int64)
    for a in range(m):
        i = order[a]
        n_min = 0
        for b in range(a + 1, m):
            j = order[b]
            dominated = True
            for k in range(d):
                if pts[i, k] > pts[j, k]:
                    dominated = False
                    break
            if not dominated:
                continue
            covered = True
            for t in range(n_min):
                mm = minimal[t]
                below = True
                for k in range(d):
                    if pts[mm, k] > pts[j, k]:
                        below = False
                        break
                if below:
                    covered = False
                    break
            if not covered:
                continue
            minimal[n_min] = j
            n_min += 1
            if n_edges == cap:
                cap *= 2
                s2 = np.empty(cap, dtype=np.int64)
                d2 = np.empty(cap, dtype=np.int64)
                s2[:n_edges] = src[:n_edges]
                d2[:n_edges] = dst[:n_edges]
                src, dst = s2, d2
            src[n_edges] = i
            dst[n_edges] = j
            n_edges += 1
    return src[:n_edges].copy(), dst[:n_edges].copy()


def _linear_extension(pts: np.ndarray) -> np.ndarray:
    # float summation is monotone, and lexicographic order breaks ties consistently
    keys = [pts[:, k] for k in range(pts.shape[1] - 1, -1, -1)]
    return np.lexsort(keys + [pts.sum(axis=1)]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class DominancePoset:
    """Transitively reduced componentwise-dominance DAG over merged points.

    Identical sample points share one node. ``node_of[i]`` is the node of
    sample point ``i``; ``multiplicity[v]`` counts the points merged into
    node ``v``. An edge ``(u, v)`` means ``node_points[u] <= node_points[v]``
    componentwise with no node strictly in between.
    """

    node_points: np.ndarray
    edges: np.ndarray
    node_of: np.ndarray
    multiplicity: np.ndarray

    @property
    def n(self) -> int:
        return self.node_points.shape[0]

    @property
    def n_points(self) -> int:
        return self.node_of.shape[0]

    @property
    def dim(self) -> int:
        return self.node_points.shape[1]

    def members(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.node_of == node)

    def leq(self, u: int, v: int) -> bool:
        """Order relation between two nodes (reflexive)."""
        return bool(np.all(self.node_points[u] <= self.node_points[v]))

    def reachability(self) -> np.ndarray:
        """Boolean (n, n) matrix R[u, v] = v reachable from u along edges.

        Computed from the edge list alone (graph search), so it can be
        compared against direct coordinate comparisons.
        """
        n = self.n
        succ = [[] for _ in range(n)]
        for u, v in self.edges:
            succ[u].append(v)
        reach = np.zeros((n, n), dtype=bool)
        for s in range(n):
            stack = [s]
            reach[s, s] = True
            while stack:
                u = stack.pop()
                for v in succ[u]:
                    if not reach[s, v]:
                        reach[s, v] = True
                        stack.append(v)
        return reach

    def aggregate(self, values: np.ndarray) -> np.ndarray:
        """Sum per-point values into per-node values."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_points,):
            raise ValueError(f"expected {self.n_points} per-point values, got {values.shape}")
        return np.bincount(self.node_of, weights=values, minlength=self.n)


def build_dominance_poset(cloud: Union[PointCloud, np.ndarray]) -> DominancePoset:
    """Hasse diagram of the componentwise order on the cloud's distinct points."""
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    uniq, inverse, counts = np.unique(cloud.points, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    uniq = np.ascontiguousarray(uniq)
    src, dst = _hasse_edges(uniq, _linear_extension(uniq))
    edges = np.stack([src, dst], axis=1) if src.size else np.empty((0, 2), dtype=np.int64)
    # deterministic edge order
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))] if edges.size else edges
    return DominancePoset(
        node_points=_readonly(uniq),
        edges=_readonly(edges.astype(np.int64)),
        node_of=_readonly(inverse.astype(np.int64)),
        multiplicity=_readonly(counts.astype(np.int64)),
    )


class SetClassKind(str, Enum):
    LOWER = "lower"
    UPPER = "upper"
    CONVEX2D = "convex2d"


@dataclass(frozen=True)
class SetClassDescriptor:
    """A class of sets in [0,1]^d together with its entropy exponent."""

    kind: SetClassKind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", SetClassKind(self.kind))
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind is SetClassKind.CONVEX2D and self.dim != 2:
            raise ValueError("exact convex-set oracles exist only for d = 2")
        if self.kind is not SetClassKind.CONVEX2D and self.dim < 2:
            raise ValueError("lower/upper sets need d >= 2 for a positive entropy exponent")

    @property
    def alpha(self) -> float:
        if self.kind is SetClassKind.CONVEX2D:
            return (self.dim - 1) / 2
        return float(self.dim - 1)

    @classmethod
    def lower(cls, dim: int) -> "SetClassDescriptor":
        return cls(SetClassKind.LOWER, dim)

    @classmethod
    def upper(cls, dim: int) -> "SetClassDescriptor":
        return cls(SetClassKind.UPPER, dim)

    @classmethod
    def convex2d(cls) -> "SetClassDescriptor":
        return cls(SetClassKind.CONVEX2D, 2)

    def __str__(self) -> str:
        return self.kind.value


def _tag_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


@dataclass(frozen=True)
class SeedPolicy:
    """Derives independent child streams from one master seed.

    Children are keyed by ``(replicate, purpose)`` through numpy's
    ``SeedSequence`` spawn keys; generators are Philox (counter based), so
    replicates can be evaluated in any order or in parallel.
    """

    master_seed: int

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")

    def derive(self, replicate: int, purpose: str) -> int:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(replicate), _tag_code(purpose)))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def rng(self, replicate: int, purpose: str) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.derive(replicate, purpose)))


def derive_stream(policy: SeedPolicy, replicate: int, purpose: str) -> int:
    return policy.derive(replicate, purpose)


def write_cloud_csv(cloud: PointCloud, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(cloud.dim)])
        for row in cloud.points:
            w.writerow([repr(float(v)) for v in row])


def read_cloud_csv(path: Union[str, Path]) -> PointCloud:
    rows: list[Sequence[str]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            rows.append(row)
    if rows and not _is_numeric(rows[0][0]):
        rows = rows[1:]
    return PointCloud(np.array([[float(v) for v in r] for r in rows], dtype=np.float64))


def _is_numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
