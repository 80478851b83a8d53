"""Maximum-weight convex-position subsets of planar samples.

A subset S of the sample is feasible when ``conv(S) ∩ sample == S``; these
are exactly the sample traces of convex sets (boundary inclusive). The
solver enumerates convex polygons with sample vertices through a fan
decomposition around the lowest vertex and an angular-sweep dynamic
program over one precomputed angular order per point, O(n^3) in
general position.

All orientation tests are exact: coordinates are snapped to the grid
2^-30 and handled as int64 (cross products stay below 2^62).
"""

from __future__ import annotations

import itertools

import numba
import numpy as np

from .closure import SelectionKind, SetSelection
from .model_core import PointCloud

__all__ = [
    "GRID_BITS",
    "snap",
    "convex_hull_indices",
    "in_closed_hull",
    "is_feasible_convex",
    "max_weight_convex_subset_2d",
    "brute_force_convex_subset",
    "convex_abs_sup",
]

GRID_BITS = 30
BRUTE_FORCE_LIMIT = 12


def snap(points) -> np.ndarray:
    """Integer grid coordinates used by every exact predicate."""
    pts = np.asarray(points.points if isinstance(points, PointCloud) else points, dtype=np.float64)
    return np.rint(pts * float(1 << GRID_BITS)).astype(np.int64)


def _cross(o, a, b) -> int:
    return int((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def convex_hull_indices(ipts: np.ndarray, subset) -> list[int]:
    """Counter-clockwise hull vertices of ``ipts[subset]`` (no collinear vertices)."""
    subset = sorted(set(int(i) for i in subset), key=lambda i: (ipts[i, 0], ipts[i, 1], i))
    # drop exact duplicates
    uniq: list[int] = []
    for i in subset:
        if not uniq or tuple(ipts[uniq[-1]]) != tuple(ipts[i]):
            uniq.append(i)
    if len(uniq) <= 2:
        return uniq
    lower: list[int] = []
    for i in uniq:
        while len(lower) >= 2 and _cross(ipts[lower[-2]], ipts[lower[-1]], ipts[i]) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(uniq):
        while len(upper) >= 2 and _cross(ipts[upper[-2]], ipts[upper[-1]], ipts[i]) <= 0:
            upper.pop()
        upper.append(i)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and tuple(ipts[hull[0]]) == tuple(ipts[hull[1]]):
        hull = hull[:1]
    return hull


def in_closed_hull(hull: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Membership of integer ``query`` points in the closed hull of ``hull``.

    ``hull`` holds counter-clockwise vertices as returned by
    :func:`convex_hull_indices` (0, 1, 2 or more vertices).
    """
    query = np.atleast_2d(query)
    k = hull.shape[0]
    if k == 0:
        return np.zeros(query.shape[0], dtype=bool)
    if k == 1:
        return np.all(query == hull[0], axis=1)
    if k == 2:
        a, b = hull
        cr = (b[0] - a[0]) * (query[:, 1] - a[1]) - (b[1] - a[1]) * (query[:, 0] - a[0])
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return (cr == 0) & np.all((query >= lo) & (query <= hi), axis=1)
    inside = np.ones(query.shape[0], dtype=bool)
    for v in range(k):
        a, b = hull[v], hull[(v + 1) % k]
        cr = (b[0] - a[0]) * (query[:, 1] - a[1]) - (b[1] - a[1]) * (query[:, 0] - a[0])
        inside &= cr >= 0
    return inside


def _closure_mask(ipts: np.ndarray, subset) -> np.ndarray:
    hull = convex_hull_indices(ipts, subset)
    return in_closed_hull(ipts[hull], ipts) if hull else np.zeros(ipts.shape[0], dtype=bool)


def is_feasible_convex(subset, cloud: PointCloud) -> bool:
    """True iff no unselected sample point lies inside or on conv(subset)."""
    ipts = snap(cloud)
    chosen = np.zeros(ipts.shape[0], dtype=bool)
    chosen[np.asarray(list(subset), dtype=np.int64)] = True
    if not chosen.any():
        return True
    return not np.any(_closure_mask(ipts, np.flatnonzero(chosen)) & ~chosen)


@numba.njit(cache=True)
def _below_table(X, Y, w):
    # B[a, b] = weight strictly below segment ab over x in (X[a], X[b]); flags degeneracy
    n = X.shape[0]
    order = np.argsort(X)
    B = np.zeros((n, n))
    for s in range(n - 1):
        if X[order[s]] == X[order[s + 1]]:
            return B, True
    for s in range(n):
        a = order[s]
        for t in range(s + 2, n):
            b = order[t]
            acc = 0.0
            dx = X[b] - X[a]
            dy = Y[b] - Y[a]
            for u in range(s + 1, t):
                q = order[u]
                c = dx * (Y[q] - Y[a]) - dy * (X[q] - X[a])
                if c < 0:
                    acc += w[q]
                elif c == 0:
                    return B, True
            B[a, b] = acc
    return B, False


@numba.njit(cache=True)
def _tri_interior(X, Y, w, B, a, b, c):
    # general position: weight strictly inside triangle abc
    if X[a] > X[b]:
        a, b = b, a
    if X[b] > X[c]:
        b, c = c, b
    if X[a] > X[b]:
        a, b = b, a
    cr = (X[c] - X[a]) * (Y[b] - Y[a]) - (Y[c] - Y[a]) * (X[b] - X[a])
    if cr > 0:
        return B[a, b] + B[b, c] - B[a, c]
    return B[a, c] - B[a, b] - B[b, c] - w[b]


@numba.njit(cache=True)
def _on_segment(X, Y, a, b, q):
    if (X[b] - X[a]) * (Y[q] - Y[a]) - (Y[b] - Y[a]) * (X[q] - X[a]) != 0:
        return False
    return (min(X[a], X[b]) <= X[q] <= max(X[a], X[b])) and (min(Y[a], Y[b]) <= Y[q] <= max(Y[a], Y[b]))


@numba.njit(cache=True)
def _seg_weight(X, Y, w, p, a):
    # closed segment [p, a] minus copies of p
    acc = 0.0
    for q in range(X.shape[0]):
        if X[q] == X[p] and Y[q] == Y[p]:
            continue
        if _on_segment(X, Y, p, a, q):
            acc += w[q]
    return acc


@numba.njit(cache=True)
def _tri_weight(X, Y, w, p, a, b):
    # closed triangle pab minus the closed segments [p, a] and [p, b]
    acc = 0.0
    for q in range(X.shape[0]):
        if _on_segment(X, Y, p, a, q) or _on_segment(X, Y, p, b, q):
            continue
        c1 = (X[a] - X[p]) * (Y[q] - Y[p]) - (Y[a] - Y[p]) * (X[q] - X[p])
        c2 = (X[b] - X[a]) * (Y[q] - Y[a]) - (Y[b] - Y[a]) * (X[q] - X[a])
        c3 = (X[p] - X[b]) * (Y[q] - Y[b]) - (Y[p] - Y[b]) * (X[q] - X[b])
        if c1 >= 0 and c2 >= 0 and c3 >= 0:
            acc += w[q]
    return acc


@numba.njit(cache=True)
def _angle_sort(vx, vy):
    # stable merge sort of vectors lying in one open half-plane, counter-clockwise
    n = vx.shape[0]
    idx = np.arange(n)
    tmp = np.empty(n, dtype=np.int64)
    width = 1
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                a = idx[i]
                b = idx[j]
                if vx[b] * vy[a] - vy[b] * vx[a] > 0:
                    tmp[k] = b
                    j += 1
                else:
                    tmp[k] = a
                    i += 1
                k += 1
            while i < mid:
                tmp[k] = idx[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = idx[j]
                j += 1
                k += 1
            lo += 2 * width
        idx[:] = tmp[:]
        width *= 2
    return idx


@numba.njit(cache=True)
def _before_full(ax, ay, bx, by):
    # full-circle angular order starting at the positive x axis; zero vectors last
    ha = 0 if (ay > 0 or (ay == 0 and ax > 0)) else (2 if (ax == 0 and ay == 0) else 1)
    hb = 0 if (by > 0 or (by == 0 and bx > 0)) else (2 if (bx == 0 and by == 0) else 1)
    if ha != hb:
        return ha < hb
    return ax * by - ay * bx > 0


@numba.njit(cache=True)
def _angular_orders(X, Y):
    # around[i]: other points sorted by direction from i; pos[i, q]: position of q
    n = X.shape[0]
    around = np.empty((n, max(n - 1, 1)), dtype=np.int64)
    pos = np.full((n, n), -1, dtype=np.int64)
    idx = np.empty(n - 1, dtype=np.int64)
    tmp = np.empty(n - 1, dtype=np.int64)
    for i in range(n):
        c = 0
        for q in range(n):
            if q != i:
                idx[c] = q
                c += 1
        width = 1
        while width < n - 1:
            lo = 0
            while lo < n - 1:
                mid = min(lo + width, n - 1)
                hi = min(lo + 2 * width, n - 1)
                a, b, k = lo, mid, lo
                while a < mid and b < hi:
                    qa = idx[a]
                    qb = idx[b]
                    if _before_full(X[qb] - X[i], Y[qb] - Y[i], X[qa] - X[i], Y[qa] - Y[i]):
                        tmp[k] = qb
                        b += 1
                    else:
                        tmp[k] = qa
                        a += 1
                    k += 1
                while a < mid:
                    tmp[k] = idx[a]
                    a += 1
                    k += 1
                while b < hi:
                    tmp[k] = idx[b]
                    b += 1
                    k += 1
                lo += 2 * width
            idx[:] = tmp[:]
            width *= 2
        for t in range(n - 1):
            around[i, t] = idx[t]
            pos[i, idx[t]] = t
    return around, pos


@numba.njit(cache=True)
def _convex_dp(X, Y, w, B, degenerate):
    n = X.shape[0]
    best_val = 0.0
    best_verts = np.empty(0, dtype=np.int64)
    ninf = -np.inf
    around, pos = _angular_orders(X, Y)
    rank = np.empty(n, dtype=np.int64)
    inc = np.empty(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    for p in range(n):
        base = 0.0
        above = np.empty(n, dtype=np.int64)
        m = 0
        for q in range(n):
            if X[q] == X[p] and Y[q] == Y[p]:
                base += w[q]
            elif Y[q] > Y[p] or (Y[q] == Y[p] and X[q] > X[p]):
                above[m] = q
                m += 1
        if not degenerate:
            base = w[p]
        if m == 0:
            if base > best_val:
                best_val = base
                best_verts = np.array([p], dtype=np.int64)
            continue
        vx = np.empty(m, dtype=np.int64)
        vy = np.empty(m, dtype=np.int64)
        for t in range(m):
            vx[t] = X[above[t]] - X[p]
            vy[t] = Y[above[t]] - Y[p]
        Q = above[:m][_angle_sort(vx, vy)]
        rank[:] = -1
        for t in range(m):
            rank[Q[t]] = t
        seg = np.empty(m)
        for t in range(m):
            seg[t] = _seg_weight(X, Y, w, p, Q[t]) if degenerate else w[Q[t]]
        # E[jj, ii]: best chain p -> ... -> Q[ii] -> Q[jj]
        E = np.full((m, m), ninf)
        pred = np.full((m, m), -1, dtype=np.int64)
        term_val = ninf
        term_i = -1
        term_j = -1
        for ii in range(m):
            i = Q[ii]
            dx = X[i] - X[p]
            dy = Y[i] - Y[p]
            # one cyclic pass around i starting just after the direction of p:
            # right of p->i come first (incoming, ordered), then left (outgoing, ordered)
            nin = 0
            nout = 0
            c = pos[i, p]
            for t in range(1, n - 1):
                c += 1
                if c == n - 1:
                    c = 0
                q = around[i, c]
                r = rank[q]
                if r < 0:
                    continue
                side = dx * (Y[q] - Y[i]) - dy * (X[q] - X[i])
                if side < 0:
                    if r < ii and E[ii, r] > ninf:
                        inc[nin] = r
                        nin += 1
                elif side > 0:
                    if r > ii:
                        out[nout] = r
                        nout += 1
            ptr = 0
            run = ninf
            run_k = -1
            for t in range(nout):
                jj = out[t]
                j = Q[jj]
                ox = X[j] - X[i]
                oy = Y[j] - Y[i]
                while ptr < nin:
                    kk = inc[ptr]
                    k = Q[kk]
                    if (X[i] - X[k]) * oy - (Y[i] - Y[k]) * ox > 0:
                        if E[ii, kk] > run:
                            run = E[ii, kk]
                            run_k = kk
                        ptr += 1
                    else:
                        break
                if degenerate:
                    tri = _tri_weight(X, Y, w, p, i, j)
                else:
                    tri = _tri_interior(X, Y, w, B, p, i, j)
                if run > seg[ii]:
                    val = seg[jj] + tri + run
                    pred[jj, ii] = run_k
                else:
                    val = seg[jj] + tri + seg[ii]
                E[jj, ii] = val
                # closing turn (i, j, p) must be strictly convex
                if ox * (Y[p] - Y[j]) - oy * (X[p] - X[j]) > 0 and val > term_val:
                    term_val = val
                    term_i = ii
                    term_j = jj
        # best polygon anchored at p: singleton, segment or closed fan
        cand = base
        kind = 0
        seg_t = -1
        for t in range(m):
            if base + seg[t] > cand:
                cand = base + seg[t]
                kind = 1
                seg_t = t
        if term_i >= 0 and base + term_val > cand:
            cand = base + term_val
            kind = 2
        if cand <= best_val:
            continue
        best_val = cand
        if kind == 0:
            best_verts = np.array([p], dtype=np.int64)
        elif kind == 1:
            best_verts = np.array([p, Q[seg_t]], dtype=np.int64)
        else:
            chain = np.empty(m + 1, dtype=np.int64)
            c = 0
            a, b = term_i, term_j
            chain[c] = Q[b]
            c += 1
            while a >= 0:
                chain[c] = Q[a]
                c += 1
                a, b = pred[b, a], a
            verts = np.empty(c + 1, dtype=np.int64)
            verts[0] = p
            for t in range(c):
                verts[t + 1] = chain[c - 1 - t]
            best_verts = verts
    return best_val, best_verts


@numba.njit(cache=True)
def _convex_dp_pair(X, Y, w, Bs):
    # optimal values for w and -w in one pass; general position only.
    # Bs is the symmetrized below table, so row i serves every triangle (p, i, j)
    n = X.shape[0]
    best1 = 0.0
    best2 = 0.0
    around, pos = _angular_orders(X, Y)
    rank = np.empty(n, dtype=np.int64)
    inc = np.empty(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    buf = np.empty(2 * n * n)
    col = np.empty((n, 2))
    above = np.empty(n, dtype=np.int64)
    for p in range(n):
        m = 0
        for q in range(n):
            if Y[q] > Y[p] or (Y[q] == Y[p] and X[q] > X[p]):
                above[m] = q
                m += 1
        base = w[p]
        best1 = max(best1, base)
        best2 = max(best2, -base)
        if m == 0:
            continue
        vx = np.empty(m, dtype=np.int64)
        vy = np.empty(m, dtype=np.int64)
        for t in range(m):
            vx[t] = X[above[t]] - X[p]
            vy[t] = Y[above[t]] - Y[p]
        Q = above[:m][_angle_sort(vx, vy)]
        # G[ii, jj, s]: best chain p -> ... -> Q[ii] -> Q[jj] for sign s; every
        # entry with ii < jj is written before it is read
        G = buf[:2 * m * m].reshape((m, m, 2))
        rank[:] = -1
        for t in range(m):
            rank[Q[t]] = t
            best1 = max(best1, base + w[Q[t]])
            best2 = max(best2, -base - w[Q[t]])
        for ii in range(m):
            i = Q[ii]
            dx = X[i] - X[p]
            dy = Y[i] - Y[p]
            nin = 0
            nout = 0
            c = pos[i, p]
            for t in range(1, n - 1):
                c += 1
                if c == n - 1:
                    c = 0
                q = around[i, c]
                r = rank[q]
                if r < 0:
                    continue
                side = dx * (Y[q] - Y[i]) - dy * (X[q] - X[i])
                if side < 0:
                    if r < ii:
                        inc[nin] = r
                        nin += 1
                elif side > 0:
                    if r > ii:
                        out[nout] = r
                        nout += 1
            # gather the incoming column once, with a fixed stride
            for kk in range(ii):
                col[kk, 0] = G[kk, ii, 0]
                col[kk, 1] = G[kk, ii, 1]
            ptr = 0
            run1 = -np.inf
            run2 = -np.inf
            wi = w[i]
            bpi = Bs[p, i]
            xp = X[p]
            xi = X[i]
            for t in range(nout):
                jj = out[t]
                j = Q[jj]
                ox = X[j] - X[i]
                oy = Y[j] - Y[i]
                while ptr < nin:
                    kk = inc[ptr]
                    k = Q[kk]
                    if (X[i] - X[k]) * oy - (Y[i] - Y[k]) * ox > 0:
                        run1 = max(run1, col[kk, 0])
                        run2 = max(run2, col[kk, 1])
                        ptr += 1
                    else:
                        break
                # triangle p, i, j: middle vertex by x decides the sign pattern
                xj = X[j]
                bpj = Bs[p, j]
                bij = Bs[i, j]
                if (xp < xi) == (xi < xj):
                    a, b, cc, bab, bbc, bac = p, i, j, bpi, bij, bpj
                elif (xi < xp) == (xp < xj):
                    a, b, cc, bab, bbc, bac = i, p, j, bpi, bpj, bij
                else:
                    a, b, cc, bab, bbc, bac = p, j, i, bpj, bij, bpi
                if X[a] > X[cc]:
                    a, cc = cc, a
                cr = (X[cc] - X[a]) * (Y[b] - Y[a]) - (Y[cc] - Y[a]) * (X[b] - X[a])
                if cr > 0:
                    tri = bab + bbc - bac
                else:
                    tri = bac - bab - bbc - w[b]
                v1 = w[j] + tri + max(run1, wi)
                v2 = -w[j] - tri + max(run2, -wi)
                G[ii, jj, 0] = v1
                G[ii, jj, 1] = v2
                if ox * (Y[p] - Y[j]) - oy * (X[p] - X[j]) > 0:
                    best1 = max(best1, base + v1)
                    best2 = max(best2, -base + v2)
    return best1, best2


def convex_abs_sup(cloud: PointCloud, weights) -> float:
    """``max_S |sum_{i in S} w_i|`` over feasible subsets (empty set included).

    Solves the problems for ``w`` and ``-w`` in one pass when the points are
    in general position.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if cloud.dim != 2:
        raise ValueError(f"convex-position solver needs d = 2, got d = {cloud.dim}")
    w = _as_weights(cloud, weights)
    ipts = snap(cloud)
    X = np.ascontiguousarray(ipts[:, 0])
    Y = np.ascontiguousarray(ipts[:, 1])
    B, degenerate = _below_table(X, Y, w)
    if degenerate or cloud.n < 3:
        return max(max_weight_convex_subset_2d(cloud, w).objective_value,
                   max_weight_convex_subset_2d(cloud, -w).objective_value)
    v1, v2 = _convex_dp_pair(X, Y, w, B + B.T)
    return float(max(v1, v2))


def _as_weights(cloud: PointCloud, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != cloud.n:
        raise ValueError(f"need {cloud.n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def max_weight_convex_subset_2d(cloud: PointCloud, weights) -> SetSelection:
    """Feasible subset of maximum total weight (empty set allowed, value 0).

    Returns the sample trace of the optimal polygon, i.e. every sample
    point in the closed hull of the polygon's vertices.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if cloud.dim != 2:
        raise ValueError(f"convex-position solver needs d = 2, got d = {cloud.dim}")
    w = _as_weights(cloud, weights)
    ipts = snap(cloud)
    X = np.ascontiguousarray(ipts[:, 0])
    Y = np.ascontiguousarray(ipts[:, 1])
    B, degenerate = _below_table(X, Y, w)
    value, verts = _convex_dp(X, Y, w, B, degenerate)
    if verts.size == 0:
        return SetSelection(np.empty(0, dtype=np.int64), SelectionKind.CONVEX, 0.0)
    mask = _closure_mask(ipts, verts)
    idx = np.flatnonzero(mask)
    objective = float(w[idx].sum())
    if abs(objective - value) > 1e-9 * max(1.0, np.abs(w).sum()):
        raise ArithmeticError(f"convex DP value {value} disagrees with its polygon weight {objective}")
    return SetSelection(idx, SelectionKind.CONVEX, objective)


def brute_force_convex_subset(cloud: PointCloud, weights) -> SetSelection:
    """Exhaustive optimum over all feasible subsets; test oracle (n <= 12).

    Among optimal subsets the smallest, then lexicographically first, wins.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if cloud.dim != 2:
        raise ValueError("convex-position oracle needs d = 2")
    if cloud.n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} points, got {cloud.n}")
    w = _as_weights(cloud, weights)
    ipts = snap(cloud)
    best_val, best = 0.0, ()
    for r in range(1, cloud.n + 1):
        for subset in itertools.combinations(range(cloud.n), r):
            val = float(w[list(subset)].sum())
            if val <= best_val + 1e-12:
                continue
            mask = _closure_mask(ipts, subset)
            if mask.sum() != r:
                continue
            best_val, best = val, subset
    return SetSelection(np.array(best, dtype=np.int64), SelectionKind.CONVEX, best_val)
