"""Geometric set representations and their Lebesgue measure on [0, 1]^d.

Three shapes cover every estimate and truth used here: staircases (finite
unions of lower or upper orthants), convex polygons, and the half-spaces
``{x : sum(x) <= t}`` clipped to the cube. Volumes of staircases, and of
their intersections with half-spaces, are exact for d <= 3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

__all__ = [
    "Staircase",
    "ConvexPolygon",
    "HalfSpaceSet",
    "Risk",
    "staircase_volume",
    "volume",
    "intersection_volume",
    "symmetric_difference_risk",
    "set_to_json",
    "set_from_json",
]


def _maximal(points: np.ndarray, upper: bool = False) -> np.ndarray:
    """Rows not dominated by another row (minimal rows when ``upper``)."""
    if points.shape[0] == 0:
        return points
    pts = np.unique(points, axis=0)
    sign = -1.0 if upper else 1.0
    keep = np.ones(pts.shape[0], dtype=bool)
    for lo in range(0, pts.shape[0], 512):
        blk = sign * pts[lo:lo + 512]
        # a distinct row q dominates p when p <= q componentwise
        dom = np.all(blk[:, None, :] <= sign * pts[None, :, :], axis=2)
        dom[np.arange(blk.shape[0]), np.arange(lo, lo + blk.shape[0])] = False
        keep[lo:lo + 512] = ~dom.any(axis=1)
    return pts[keep]


@dataclass(frozen=True, eq=False)
class Staircase:
    """Union of orthants spanned by an antichain of corners.

    For ``orientation="lower"`` the set is the union of boxes [0, c]; for
    ``"upper"`` the union of boxes [c, 1].
    """

    dim: int
    corners: np.ndarray
    orientation: str = "lower"

    def __post_init__(self):
        if self.orientation not in ("lower", "upper"):
            raise ValueError("orientation must be 'lower' or 'upper'")
        c = np.asarray(self.corners, dtype=np.float64).reshape(-1, self.dim)
        c = _maximal(c, upper=self.orientation == "upper")
        c = c[np.lexsort(c.T[::-1])] if c.shape[0] else c
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)

    @classmethod
    def empty(cls, dim: int, orientation: str = "lower") -> "Staircase":
        return cls(dim, np.empty((0, dim)), orientation)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.zeros(x.shape[0], dtype=bool)
        for c in self.corners:
            out |= np.all(x <= c, axis=1) if self.orientation == "lower" else np.all(x >= c, axis=1)
        return out

    def as_lower(self) -> "Staircase":
        """Lower staircase of equal volume (reflection x -> 1 - x for upper sets)."""
        if self.orientation == "lower":
            return self
        return Staircase(self.dim, 1.0 - self.corners, "lower")

    def intersect(self, other: "Staircase") -> "Staircase":
        if other.dim != self.dim or other.orientation != self.orientation:
            raise ValueError("staircases must share dimension and orientation")
        if self.corners.shape[0] == 0 or other.corners.shape[0] == 0:
            return Staircase.empty(self.dim, self.orientation)
        a, b = self.corners[:, None, :], other.corners[None, :, :]
        meet = np.minimum(a, b) if self.orientation == "lower" else np.maximum(a, b)
        return Staircase(self.dim, meet.reshape(-1, self.dim), self.orientation)


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon given by counter-clockwise vertices (0, 1, 2 or more)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return 2

    def area(self) -> float:
        v = self.vertices
        if v.shape[0] < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        v = self.vertices
        if v.shape[0] < 3:
            return np.zeros(x.shape[0], dtype=bool)  # measure-zero sets
        inside = np.ones(x.shape[0], dtype=bool)
        for k in range(v.shape[0]):
            a, b = v[k], v[(k + 1) % v.shape[0]]
            inside &= (b[0] - a[0]) * (x[:, 1] - a[1]) - (b[1] - a[1]) * (x[:, 0] - a[0]) >= 0
        return inside

    def clip(self, normal, offset: float) -> "ConvexPolygon":
        """Intersection with the half-plane ``normal . x <= offset``."""
        normal = np.asarray(normal, dtype=np.float64)
        v = self.vertices
        if v.shape[0] < 3:
            return ConvexPolygon(np.empty((0, 2)))
        out = []
        s = v @ normal - offset
        for k in range(v.shape[0]):
            a, b = v[k], v[(k + 1) % v.shape[0]]
            sa, sb = s[k], s[(k + 1) % v.shape[0]]
            if sa <= 0:
                out.append(a)
            if (sa < 0 < sb) or (sb < 0 < sa):
                out.append(a + (b - a) * (sa / (sa - sb)))
        return ConvexPolygon(np.array(out) if out else np.empty((0, 2)))

    def intersect(self, other: "ConvexPolygon") -> "ConvexPolygon":
        res = self
        w = other.vertices
        if w.shape[0] < 3:
            return ConvexPolygon(np.empty((0, 2)))
        for k in range(w.shape[0]):
            a, b = w[k], w[(k + 1) % w.shape[0]]
            # left of a->b is inside: -(b-a)^perp . x <= -(b-a)^perp . a
            normal = np.array([b[1] - a[1], a[0] - b[0]])
            res = res.clip(normal, float(normal @ a))
        return res


@dataclass(frozen=True)
class HalfSpaceSet:
    """``{x in [0,1]^d : sum(x) <= threshold}`` (or ``>=`` when ``upper``)."""

    dim: int
    threshold: float
    upper: bool = False

    @classmethod
    def default(cls, dim: int) -> "HalfSpaceSet":
        return cls(dim, dim / 2.0)

    def contains(self, x) -> np.ndarray:
        s = np.atleast_2d(np.asarray(x, dtype=np.float64)).sum(axis=1)
        return s >= self.threshold if self.upper else s <= self.threshold

    def volume(self) -> float:
        below = _irwin_hall_cdf(self.dim, self.threshold)
        return 1.0 - below if self.upper else below

    def as_polygon(self) -> ConvexPolygon:
        if self.dim != 2:
            raise ValueError("polygon form exists only for d = 2")
        square = ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
        if self.upper:
            return square.clip([-1.0, -1.0], -self.threshold)
        return square.clip([1.0, 1.0], self.threshold)


def _irwin_hall_cdf(d: int, t: float) -> float:
    return sum((-1) ** k * math.comb(d, k) * max(0.0, t - k) ** d for k in range(d + 1)) / math.factorial(d)


def _height_cells(st: Staircase):
    """Cells of the lower staircase's height function over the first d-1 axes."""
    c = st.as_lower().corners
    d = st.dim
    if d == 1:
        return [np.array([1.0])], np.array([c[:, 0].max() if c.shape[0] else 0.0]), [np.array([0.0])]
    axes = [np.unique(c[:, k]) for k in range(d - 1)]
    grid = np.zeros([a.size for a in axes])
    idx = tuple(np.searchsorted(axes[k], c[:, k]) for k in range(d - 1))
    np.maximum.at(grid, idx, c[:, d - 1])
    for k in range(d - 1):
        grid = np.flip(np.maximum.accumulate(np.flip(grid, axis=k), axis=k), axis=k)
    lows = [np.concatenate([[0.0], a[:-1]]) for a in axes]
    widths = [a - lo for a, lo in zip(axes, lows)]
    return widths, grid, lows


def staircase_volume(st: Staircase) -> float:
    """Exact Lebesgue volume for d <= 3."""
    if st.dim > 3:
        raise ValueError("exact staircase volume implemented for d <= 3; use Monte Carlo")
    if st.corners.shape[0] == 0:
        return 0.0
    widths, grid, _ = _height_cells(st)
    if st.dim == 1:
        return float(grid[0])
    if st.dim == 2:
        return float(np.dot(widths[0], grid))
    return float(widths[0] @ grid @ widths[1])


def _ramp_mixed(t: float, h: np.ndarray, lo_x, hi_x, lo_y=None, hi_y=None) -> np.ndarray:
    # integral of min(h, max(0, t - s)) with s = x (1-D) or s = x + y (2-D) over cells
    if lo_y is None:
        def F(s, c):
            return -np.maximum(0.0, c - s) ** 2 / 2.0

        g = lambda s: F(s, t) - F(s, t - h)  # noqa: E731
        return g(hi_x) - g(lo_x)

    def T(s, c):
        return np.maximum(0.0, c - s) ** 3 / 6.0

    g = lambda s: T(s, t) - T(s, t - h)  # noqa: E731
    return g(hi_x + hi_y) - g(hi_x + lo_y) - g(lo_x + hi_y) + g(lo_x + lo_y)


def _staircase_halfspace_overlap(st: Staircase, t: float) -> float:
    # volume of (lower staircase) ∩ {sum(x) <= t}
    if st.corners.shape[0] == 0 or t <= 0:
        return 0.0
    widths, grid, lows = _height_cells(st)
    if st.dim == 1:
        return float(min(grid[0], max(0.0, t)))
    if st.dim == 2:
        lo, hi = lows[0], lows[0] + widths[0]
        return float(_ramp_mixed(t, grid, lo, hi).sum())
    lo_x, lo_y = np.meshgrid(lows[0], lows[1], indexing="ij")
    hi_x, hi_y = np.meshgrid(lows[0] + widths[0], lows[1] + widths[1], indexing="ij")
    return float(_ramp_mixed(t, grid, lo_x, hi_x, lo_y, hi_y).sum())


AnySet = Union[Staircase, ConvexPolygon, HalfSpaceSet]


def volume(s: AnySet) -> float:
    if isinstance(s, Staircase):
        return staircase_volume(s)
    if isinstance(s, ConvexPolygon):
        return s.area()
    return s.volume()


def intersection_volume(a: AnySet, b: AnySet) -> Optional[float]:
    """Exact volume of a ∩ b, or None when no exact route exists."""
    if isinstance(b, Staircase) and not isinstance(a, Staircase):
        a, b = b, a
    if isinstance(b, ConvexPolygon) and isinstance(a, HalfSpaceSet):
        a, b = b, a
    if isinstance(a, Staircase):
        if a.dim > 3:
            return None
        if isinstance(b, Staircase):
            if a.orientation == b.orientation:
                return staircase_volume(a.intersect(b))
            return None
        if isinstance(b, HalfSpaceSet):
            d = a.dim
            if a.orientation == "lower":
                below = _staircase_halfspace_overlap(a, b.threshold)
                return staircase_volume(a) - below if b.upper else below
            refl = a.as_lower()
            # reflected half-space: sum(x) <= t  <->  sum(1-x) >= d - t
            below_refl = _staircase_halfspace_overlap(refl, d - b.threshold)
            return below_refl if b.upper else staircase_volume(refl) - below_refl
        return None
    if isinstance(a, ConvexPolygon):
        if isinstance(b, ConvexPolygon):
            return a.intersect(b).area()
        if isinstance(b, HalfSpaceSet) and b.dim == 2:
            return a.intersect(b.as_polygon()).area()
        return None
    if isinstance(a, HalfSpaceSet) and isinstance(b, HalfSpaceSet):
        if a.upper == b.upper:
            return (a if (a.threshold <= b.threshold) != a.upper else b).volume()
        lo, hi = (a, b) if not a.upper else (b, a)
        # {hi.threshold <= sum <= lo.threshold}
        return max(0.0, lo.volume() - (1.0 - hi.volume()))
    return None


class Risk(NamedTuple):
    value: float
    stderr: float

    def __float__(self) -> float:
        return float(self.value)


def symmetric_difference_risk(est: AnySet, truth: AnySet, mode: str = "exact",
                              n_mc: int = 200_000, seed: Optional[int] = None) -> Risk:
    """P|est Δ truth| under the uniform law on [0, 1]^d.

    ``mode="exact"`` uses closed-form volumes and raises when the pair has
    no exact route; ``mode="monte_carlo"`` averages the indicator of the
    symmetric difference over ``n_mc`` uniform points.
    """
    if est.dim != truth.dim:
        raise ValueError(f"dimension mismatch: {est.dim} vs {truth.dim}")
    if mode == "exact":
        inter = intersection_volume(est, truth)
        if inter is None:
            raise ValueError(f"no exact route for {type(est).__name__} vs {type(truth).__name__}")
        return Risk(max(0.0, volume(est) + volume(truth) - 2.0 * inter), 0.0)
    if mode == "monte_carlo":
        rng = np.random.default_rng(seed)
        hits = 0
        done = 0
        while done < n_mc:
            m = min(100_000, n_mc - done)
            x = rng.random((m, est.dim))
            hits += int(np.count_nonzero(est.contains(x) != truth.contains(x)))
            done += m
        p = hits / n_mc
        return Risk(p, math.sqrt(max(p * (1 - p), 0.0) / n_mc))
    raise ValueError(f"unknown mode {mode!r}")


def set_to_json(s: AnySet) -> str:
    if isinstance(s, Staircase):
        doc = {"type": "staircase", "dim": s.dim, "orientation": s.orientation, "corners": s.corners.tolist()}
    elif isinstance(s, ConvexPolygon):
        doc = {"type": "polygon", "vertices": s.vertices.tolist()}
    else:
        doc = {"type": "halfspace", "dim": s.dim, "threshold": s.threshold, "upper": s.upper}
    return json.dumps(doc)


def set_from_json(text: str) -> AnySet:
    doc = json.loads(text)
    kind = doc.get("type")
    if kind == "staircase":
        return Staircase(int(doc["dim"]), np.array(doc["corners"], dtype=float).reshape(-1, int(doc["dim"])),
                         doc.get("orientation", "lower"))
    if kind == "polygon":
        return ConvexPolygon(np.array(doc["vertices"], dtype=float).reshape(-1, 2))
    if kind == "halfspace":
        return HalfSpaceSet(int(doc["dim"]), float(doc["threshold"]), bool(doc.get("upper", False)))
    raise ValueError(f"unknown set type {kind!r}")
