"""Maximum-weight down-sets and up-sets of a dominance poset via min cut."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .flow import FlowNetwork, max_flow
from .model_core import DominancePoset

__all__ = [
    "SelectionKind",
    "WeightedInstance",
    "SetSelection",
    "closure_network",
    "max_weight_closed_mask",
    "max_weight_down_set",
    "max_weight_up_set",
    "brute_force_down_set",
    "brute_force_up_set",
    "is_down_set",
    "is_up_set",
]

BRUTE_FORCE_LIMIT = 22


class SelectionKind(str, Enum):
    DOWN = "down-set"
    UP = "up-set"
    CONVEX = "convex-position"


@dataclass(frozen=True, eq=False)
class WeightedInstance:
    """A poset with one real weight per node (merged points carry summed weights)."""

    poset: DominancePoset
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != self.poset.n:
            raise ValueError(f"need {self.poset.n} node weights, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, poset: DominancePoset, point_weights) -> "WeightedInstance":
        return cls(poset, poset.aggregate(point_weights))


@dataclass(frozen=True, eq=False)
class SetSelection:
    """A selected set of sample points.

    ``indices`` are sample-point indices (sorted); ``nodes`` the poset
    nodes they occupy when the selection came from a poset solver.
    """

    indices: np.ndarray
    kind: SelectionKind
    objective_value: float
    nodes: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "indices", np.sort(np.asarray(self.indices, dtype=np.int64)))
        object.__setattr__(self, "kind", SelectionKind(self.kind))

    def __len__(self) -> int:
        return self.indices.size

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.indices] = True
        return m


def _selection_from_nodes(poset: DominancePoset, node_mask: np.ndarray, weights, kind) -> SetSelection:
    nodes = np.flatnonzero(node_mask)
    indices = np.flatnonzero(node_mask[poset.node_of])
    return SetSelection(indices, kind, float(weights[nodes].sum()) if nodes.size else 0.0, nodes)


def closure_network(inst: WeightedInstance, kind: SelectionKind = SelectionKind.DOWN,
                    forced: Optional[int] = None) -> FlowNetwork:
    """Flow network whose source-side cuts are the closed sets of ``kind``.

    Node v gets an arc s -> v of capacity w_v when w_v > 0 and v -> t of
    capacity -w_v when w_v < 0. Each Hasse edge u <= v becomes an infinite
    arc v -> u for down-sets (u -> v for up-sets). ``forced`` pins one node
    to the source side with an infinite arc.
    """
    return _raw_network(inst.poset.n, inst.poset.edges, inst.weights, kind, forced)


def _raw_network(m: int, edges: np.ndarray, w: np.ndarray, kind: SelectionKind,
                 forced: Optional[int] = None) -> FlowNetwork:
    s, t = m, m + 1
    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    lo, hi = edges[:, 0], edges[:, 1]
    if SelectionKind(kind) is SelectionKind.DOWN:
        ptail, phead = hi, lo
    else:
        ptail, phead = lo, hi
    tails = [np.full(pos.size, s), neg, ptail]
    heads = [pos, np.full(neg.size, t), phead]
    caps = [w[pos], -w[neg], np.full(ptail.size, np.inf)]
    if forced is not None:
        tails.append(np.array([s]))
        heads.append(np.array([forced]))
        caps.append(np.array([np.inf]))
    return FlowNetwork(m + 2, s, t, np.concatenate(tails), np.concatenate(heads), np.concatenate(caps))


def max_weight_closed_mask(n_nodes: int, edges: np.ndarray, weights: np.ndarray,
                           kind: SelectionKind = SelectionKind.UP) -> np.ndarray:
    """Smallest maximum-weight closed node set of a DAG given as raw arrays.

    ``edges`` rows ``(u, v)`` mean u <= v; any generating set of the order
    (not necessarily reduced) gives the same closed sets.
    """
    w = np.asarray(weights, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    res = max_flow(_raw_network(int(n_nodes), edges, w, SelectionKind(kind)))
    return res.source_side[:n_nodes].copy()


def _solve_closure(inst: WeightedInstance, kind: SelectionKind, allow_empty: bool) -> SetSelection:
    m = inst.poset.n
    res = max_flow(closure_network(inst, kind))
    best = _selection_from_nodes(inst.poset, res.source_side[:m], inst.weights, kind)
    if best.nodes.size or allow_empty:
        return best
    # every nonempty down-set contains a minimal node (maximal for up-sets)
    deg = np.bincount(inst.poset.edges[:, 1 if kind is SelectionKind.DOWN else 0], minlength=m)
    candidates = np.flatnonzero(deg == 0)
    best = None
    for v in candidates:
        res = max_flow(closure_network(inst, kind, forced=int(v)))
        sel = _selection_from_nodes(inst.poset, res.source_side[:m], inst.weights, kind)
        if best is None or sel.objective_value > best.objective_value + 1e-12:
            best = sel
    return best


def max_weight_down_set(inst: WeightedInstance, allow_empty: bool = True) -> SetSelection:
    """Down-set of maximum total weight (the smallest one among ties).

    With ``allow_empty=False`` the best nonempty down-set is returned even
    when every weight is negative.
    """
    return _solve_closure(inst, SelectionKind.DOWN, allow_empty)


def max_weight_up_set(inst: WeightedInstance, allow_empty: bool = True) -> SetSelection:
    """Up-set of maximum total weight (the smallest one among ties)."""
    return _solve_closure(inst, SelectionKind.UP, allow_empty)


def is_down_set(poset: DominancePoset, node_mask: np.ndarray) -> bool:
    node_mask = np.asarray(node_mask, dtype=bool)
    lo, hi = poset.edges[:, 0], poset.edges[:, 1]
    return not np.any(node_mask[hi] & ~node_mask[lo])


def is_up_set(poset: DominancePoset, node_mask: np.ndarray) -> bool:
    node_mask = np.asarray(node_mask, dtype=bool)
    lo, hi = poset.edges[:, 0], poset.edges[:, 1]
    return not np.any(node_mask[lo] & ~node_mask[hi])


def _enumerate_closed(inst: WeightedInstance, kind: SelectionKind):
    m = inst.poset.n
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} nodes, got {m}")
    masks = np.arange(1 << m, dtype=np.int64)
    values = np.zeros(1, dtype=np.float64)
    for v in range(m):
        values = np.concatenate([values, values + inst.weights[v]])
    ok = np.ones(masks.size, dtype=bool)
    for lo, hi in inst.poset.edges:
        a, b = (hi, lo) if kind is SelectionKind.DOWN else (lo, hi)
        ok &= ~(((masks >> a) & 1).astype(bool) & ~((masks >> b) & 1).astype(bool))
    return masks[ok], values[ok]


def _brute_force(inst: WeightedInstance, kind: SelectionKind, allow_empty: bool, tol: float) -> SetSelection:
    masks, values = _enumerate_closed(inst, kind)
    if not allow_empty:
        keep = masks != 0
        masks, values = masks[keep], values[keep]
    top = values.max()
    winners = masks[values >= top - tol]
    meet = np.bitwise_and.reduce(winners)
    if meet == 0 and not allow_empty:
        meet = winners[0]
    node_mask = ((meet >> np.arange(inst.poset.n)) & 1).astype(bool)
    # report the weight sum of the returned set, summed like the flow solver does
    return _selection_from_nodes(inst.poset, node_mask, inst.weights, kind)


def brute_force_down_set(inst: WeightedInstance, allow_empty: bool = True, tol: float = 1e-12) -> SetSelection:
    """Exhaustive optimum over all 2^m node subsets closed downward.

    The returned argmax is the intersection of all optimal down-sets
    (itself optimal, since optimal closed sets form a lattice).
    """
    return _brute_force(inst, SelectionKind.DOWN, allow_empty, tol)


def brute_force_up_set(inst: WeightedInstance, allow_empty: bool = True, tol: float = 1e-12) -> SetSelection:
    return _brute_force(inst, SelectionKind.UP, allow_empty, tol)
