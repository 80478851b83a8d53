"""Monte Carlo tools for suprema of multiplier empirical processes over set classes.

For a set class with an exact maximum-weight oracle,
``sup_C |sum_i xi_i 1_C(X_i)| = max(oracle(xi), oracle(-xi))`` because the
empty set belongs to every class considered here. Everything below builds
on that identity: expected suprema, Lagrangian localization, a packing
entropy probe, and numerical checks of two multiplier inequalities.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special
from scipy.spatial import ConvexHull

from .convex import convex_abs_sup
from .erm import max_weight_set
from .model_core import (PointCloud, SeedPolicy, SetClassDescriptor, SetClassKind,
                         build_dominance_poset)
from .sets import ConvexPolygon

__all__ = [
    "LawKind",
    "MultiplierLaw",
    "SupEstimate",
    "EnvelopePoint",
    "EntropyEstimate",
    "MultiplierCheck",
    "symmetrized_sup",
    "estimate_sup_expectation",
    "localized_sup_lagrangian",
    "greedy_packing_entropy",
    "multiplier_inequality_check",
    "concave_majorant",
    "append_sup_csv",
    "SUP_CSV_FIELDS",
    "ENTROPY_CALIBRATION",
]

SUP_CSV_FIELDS = ["class", "d", "alpha", "n", "sigma", "R", "mean_sup", "stderr", "seed"]

# Target exponent over the mean raw estimate on random lower
# staircases in d = 2 (pilot seeds 101-105, n = 1000, 4000 members).
ENTROPY_CALIBRATION = 1.34

SupFunction = Callable[[np.ndarray, np.ndarray], float]


class LawKind(str, Enum):
    RADEMACHER = "rademacher"
    GAUSSIAN = "gaussian"
    CUSTOM = "custom"


@dataclass(frozen=True)
class MultiplierLaw:
    """Law of the multipliers xi_i.

    ``CUSTOM`` laws take a sampler ``(rng, size) -> array``; its tail is
    approximated by ``tail_samples`` draws. Samples are recentred so that
    the law is mean zero.
    """

    kind: LawKind = LawKind.RADEMACHER
    sampler: Optional[Callable] = None
    tail_samples: int = 200_000

    def __post_init__(self):
        object.__setattr__(self, "kind", LawKind(self.kind))
        if self.kind is LawKind.CUSTOM and self.sampler is None:
            raise ValueError("a custom law needs a sampler")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind is LawKind.RADEMACHER:
            return np.where(rng.random(size) < 0.5, -1.0, 1.0)
        if self.kind is LawKind.GAUSSIAN:
            return rng.standard_normal(size)
        return np.asarray(self.sampler(rng, size), dtype=np.float64)

    def _custom_abs(self) -> np.ndarray:
        rng = np.random.default_rng(0)
        x = np.asarray(self.sampler(rng, self.tail_samples), dtype=np.float64)
        return np.sort(np.abs(x - x.mean()))

    def tail_integral(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """``int_0^inf g(P(|xi| > t)) dt`` for nondecreasing g with g(0) = 0."""
        if self.kind is LawKind.RADEMACHER:
            return float(g(np.array([1.0]))[0])
        if self.kind is LawKind.GAUSSIAN:
            # beyond t = 12 the tail is below 1e-32
            t = np.linspace(0.0, 12.0, 48_001)
            return float(np.trapezoid(g(special.erfc(t / math.sqrt(2.0))), t))
        a = self._custom_abs()
        m = a.size
        # S(t) = (m - j)/m on [a_(j-1), a_(j)) with a_(-1) = 0
        gaps = np.diff(np.concatenate([[0.0], a]))
        surv = (m - np.arange(m)) / m
        return float(np.sum(gaps * g(surv)))


@dataclass(frozen=True)
class SupEstimate:
    """Mean of ``sup |sum xi_i 1_C(X_i)| / sqrt(n)`` over R replicates."""

    n: int
    set_class: str
    dim: int
    alpha: float
    sigma: float
    R: int
    mean_sup: float
    stderr: float
    seed: int
    values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.R < 2:
            raise ValueError("need at least two replicates for a standard error")

    def row(self) -> dict:
        return {"class": self.set_class, "d": self.dim, "alpha": repr(float(self.alpha)), "n": self.n,
                "sigma": repr(float(self.sigma)), "R": self.R, "mean_sup": repr(float(self.mean_sup)),
                "stderr": repr(float(self.stderr)), "seed": self.seed}


def _as_cloud(cloud) -> PointCloud:
    return cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)


def _oracle_value(cloud: PointCloud, desc: SetClassDescriptor, w: np.ndarray, poset=None) -> float:
    return max_weight_set(cloud, desc, w, poset).objective_value


def _raw_sup(cloud: PointCloud, cls, xi: np.ndarray) -> float:
    """Unnormalized ``sup_C |sum xi_i 1_C(X_i)|``."""
    if callable(cls) and not isinstance(cls, SetClassDescriptor):
        return float(cls(cloud.points, xi))
    desc = cls if isinstance(cls, SetClassDescriptor) else SetClassDescriptor(SetClassKind(cls), cloud.dim)
    if desc.dim != cloud.dim:
        raise ValueError(f"class lives in d = {desc.dim}, cloud in d = {cloud.dim}")
    if desc.kind is SetClassKind.CONVEX2D:
        return convex_abs_sup(cloud, xi)
    poset = build_dominance_poset(cloud)
    return max(_oracle_value(cloud, desc, xi, poset), _oracle_value(cloud, desc, -xi, poset))


def symmetrized_sup(cloud, cls, multipliers) -> float:
    """``sup_C |sum_i xi_i 1_C(X_i)| / sqrt(n)`` computed exactly with oracle calls for ``xi`` and ``-xi``.

    Parameters
    ----------
    cloud : PointCloud or array of shape (n, d)
    cls : SetClassDescriptor, class name, or callable
        A callable receives ``(points, xi)`` and returns the unnormalized
        absolute supremum directly.
    multipliers : array of shape (n,)
    """
    cloud = _as_cloud(cloud)
    xi = np.asarray(multipliers, dtype=np.float64).reshape(-1)
    if xi.shape[0] != cloud.n:
        raise ValueError(f"need {cloud.n} multipliers, got {xi.shape[0]}")
    return _raw_sup(cloud, cls, xi) / math.sqrt(cloud.n)


def _law(law) -> MultiplierLaw:
    return law if isinstance(law, MultiplierLaw) else MultiplierLaw(LawKind(law))


def estimate_sup_expectation(cls: SetClassDescriptor, n: int, R: int, law="rademacher",
                             seed: int = 0) -> SupEstimate:
    """Monte Carlo mean of the normalized supremum over fresh uniform clouds.

    Replicate r draws its cloud and multipliers from streams derived from
    ``(seed, r, n)``, so estimates at different n are independent and any
    single replicate can be recomputed in isolation.
    """
    if R < 2:
        raise ValueError("need R >= 2")
    law = _law(law)
    policy = SeedPolicy(seed)
    vals = np.empty(R)
    for r in range(R):
        rng = policy.rng(r, f"ep-sup/{cls.kind.value}/d={cls.dim}/n={n}")
        cloud = PointCloud.uniform(n, cls.dim, rng)
        xi = law.sample(rng, n)
        vals[r] = symmetrized_sup(cloud, cls, xi)
    return SupEstimate(n, cls.kind.value, cls.dim, cls.alpha, 1.0, R, float(vals.mean()),
                       float(vals.std(ddof=1) / math.sqrt(R)), seed, vals)


def append_sup_csv(estimates: Sequence[SupEstimate], path: Union[str, Path]) -> None:
    """Append rows to a CSV file, writing the header when the file is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUP_CSV_FIELDS, lineterminator="\n")
        if new:
            w.writeheader()
        for est in estimates:
            w.writerow(est.row())


@dataclass(frozen=True)
class EnvelopePoint:
    lam: float
    size: int
    value: float


def localized_sup_lagrangian(cloud, cls, multipliers, lambda_grid) -> list:
    """Size/value pairs of the penalized problems ``max_C sum xi_i 1_C - lam |C|``.

    Each solution with size k attains ``max {sum_C xi : |C| <= k}`` (a
    larger set would lose at least ``lam`` per extra point), so the returned
    points lie on the concave majorant of the constrained supremum curve.
    Sizes count sample points. Points are returned by increasing size with
    duplicates removed.
    """
    cloud = _as_cloud(cloud)
    desc = cls if isinstance(cls, SetClassDescriptor) else SetClassDescriptor(SetClassKind(cls), cloud.dim)
    xi = np.asarray(multipliers, dtype=np.float64).reshape(-1)
    lams = np.asarray(lambda_grid, dtype=np.float64).reshape(-1)
    if lams.size == 0 or np.any(lams < 0) or np.any(np.diff(lams) < 0):
        raise ValueError("lambda grid must be nonnegative and sorted")
    poset = None if desc.kind is SetClassKind.CONVEX2D else build_dominance_poset(cloud)
    seen = {}
    for lam in lams:
        sel = max_weight_set(cloud, desc, xi - lam, poset)
        k = len(sel)
        value = float(xi[sel.indices].sum()) if k else 0.0
        if k not in seen or value > seen[k].value:
            seen[k] = EnvelopePoint(float(lam), k, value)
    return [seen[k] for k in sorted(seen)]


# entropy probe -------------------------------------------------------------


def _random_member(desc: SetClassDescriptor, points: np.ndarray, rng: np.random.Generator,
                   max_corners: int = 256) -> np.ndarray:
    k = int(math.exp(rng.uniform(0.0, math.log(max_corners))))
    if desc.kind is SetClassKind.CONVEX2D:
        k = max(k, 3)
        v = rng.random((k, 2))
        try:
            hull = ConvexHull(v)
        except Exception:  # degenerate draw: collinear vertices
            return np.zeros(points.shape[0], dtype=bool)
        return ConvexPolygon(v[hull.vertices]).contains(points)
    corners = rng.random((k, desc.dim))
    if desc.kind is SetClassKind.LOWER:
        return np.any(np.all(points[:, None, :] <= corners[None], axis=2), axis=1)
    return np.any(np.all(points[:, None, :] >= corners[None], axis=2), axis=1)


@dataclass(frozen=True)
class EntropyEstimate:
    eps: np.ndarray
    counts: np.ndarray
    alpha_hat: float
    alpha_raw: float
    window: np.ndarray

    @property
    def log_counts(self) -> np.ndarray:
        return np.log(self.counts)


def _greedy_pack(packed: np.ndarray, n: int, eps: float) -> int:
    thr = eps * eps * n
    kept = np.empty((64, packed.shape[1]), dtype=np.uint8)
    c = 0
    for row in packed:
        if c == 0 or np.bitwise_count(kept[:c] ^ row).sum(axis=1, dtype=np.int64).min() > thr:
            if c == kept.shape[0]:
                kept = np.vstack([kept, np.empty_like(kept)])
            kept[c] = row
            c += 1
    return c


def greedy_packing_entropy(cls, cloud, eps_grid=None, family_size: int = 4000, seed: int = 0,
                           family: Optional[np.ndarray] = None,
                           calibration: float = ENTROPY_CALIBRATION) -> EntropyEstimate:
    """Entropy exponent probe from greedy packings of random class members.

    Members are random staircases generated by a log-uniform number of
    uniform corners (hulls of random points for convex sets), or the rows of
    ``family`` when given. For each eps a greedy eps-packing in L2(P_n) is
    built in generation order, so a larger family from the same seed never
    yields smaller counts. ``log(log M)`` is regressed on ``log(1/eps)``
    over counts in ``[10, family_size / 8]``; the slope estimates
    ``2 alpha``. The raw value is scaled by ``calibration``.
    """
    cloud = _as_cloud(cloud)
    eps = np.geomspace(0.5, 0.1, 10) if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    if eps.size < 2 or np.any(eps <= 0) or np.unique(eps).size != eps.size:
        raise ValueError("eps grid needs at least two distinct positive values")
    if family is None:
        desc = cls if isinstance(cls, SetClassDescriptor) else SetClassDescriptor(SetClassKind(cls), cloud.dim)
        rng = np.random.default_rng(seed)
        family = np.array([_random_member(desc, cloud.points, rng) for _ in range(family_size)])
    family = np.asarray(family, dtype=bool).reshape(-1, cloud.n)
    packed = np.packbits(family, axis=1)
    counts = np.array([_greedy_pack(packed, cloud.n, e) for e in eps])
    window = (counts >= 10) & (counts <= family.shape[0] / 8)
    if counts.max() <= 1:
        return EntropyEstimate(eps, counts, 0.0, 0.0, window)
    if window.sum() < 2:
        raise ValueError("degenerate eps grid: fewer than two counts inside the fitting window")
    slope = np.polyfit(np.log(1.0 / eps[window]), np.log(np.log(counts[window])), 1)[0]
    raw = float(slope / 2.0)
    return EntropyEstimate(eps, counts, raw * calibration, raw, window)


# multiplier inequalities ---------------------------------------------------


def concave_majorant(x, y) -> Callable[[np.ndarray], np.ndarray]:
    """Least concave majorant of points (x, y), as a vectorized function.

    Constant beyond the largest x.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    order = np.lexsort((-y, x))
    hull: list[tuple[float, float]] = []
    for xi, yi in zip(x[order], y[order]):
        if hull and hull[-1][0] == xi:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (xi - x1) <= (yi - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((xi, yi))
    # keep the nondecreasing part only
    hx = np.array([p[0] for p in hull])
    hy = np.maximum.accumulate(np.array([p[1] for p in hull]))
    return lambda t: np.interp(np.asarray(t, dtype=np.float64), hx, hy)


@dataclass(frozen=True)
class MultiplierCheck:
    """Outcome of the multiplier-inequality checks.

    ``rows`` hold per-configuration estimates: n, lhs, lhs_se, rhs_tail,
    rhs_order, rhs_order_se.
    """

    violations: int
    max_slack: float
    rows: list


def _prefix_sup_curve(cls, dim: int, n: int, R: int, rng: np.random.Generator):
    ks = np.unique(np.rint(np.geomspace(1, n, min(n, 10))).astype(int))
    means, ses = [], []
    for k in ks:
        vals = np.empty(R)
        for r in range(R):
            cloud = PointCloud.uniform(int(k), dim, rng)
            eps = np.where(rng.random(int(k)) < 0.5, -1.0, 1.0)
            vals[r] = _raw_sup(cloud, cls, eps)
        means.append(vals.mean())
        ses.append(vals.std(ddof=1) / math.sqrt(R))
    return ks, np.array(means), np.array(ses)


def _psi_from_curve(ks, means, ses, n: int):
    # upper confidence values; the curve is nondecreasing in k, so the value
    # at the next grid point bounds every k up to it
    upper = np.maximum.accumulate(means + 3.0 * ses)
    xs = np.concatenate([[0.0], ks[:-1].astype(float), [float(n)]])
    ys = np.concatenate([[0.0], upper])
    xs = np.concatenate([xs, ks.astype(float)])
    ys = np.concatenate([ys, upper])
    return concave_majorant(xs, ys)


def multiplier_inequality_check(cls, dim: int, law, n_values: Sequence[int], n_configs: int,
                                seed: int = 0, R_psi: int = 60, R_lhs: int = 100,
                                R_order: int = 4000, t_grid=None) -> MultiplierCheck:
    """Monte Carlo check of two multiplier inequalities on random configurations.

    For each configuration, psi is the concave majorant of upper confidence
    values of ``k -> E sup_C |sum_{i<=k} eps_i 1_C(X_i)|``. The left side
    ``E sup_C |sum_{i<=n} xi_i 1_C(X_i)|`` is compared against the tail form
    ``4 int_0^inf psi(n P(|xi| > t)) dt`` and the order-statistic form
    ``E sum_k (|xi|_(k) - |xi|_(k+1)) psi(k)``. A violation is an excess of
    the left side over either right side by more than three joint
    standard errors.

    ``cls`` may be a SetClassDescriptor or a callable ``(points, xi) -> sup``;
    ``t_grid``, when given, replaces the law's built-in tail integral by the
    trapezoid rule on those nodes with an empirical tail.
    """
    law = _law(law)
    policy = SeedPolicy(seed)
    rows = []
    violations = 0
    max_slack = -math.inf
    for c in range(n_configs):
        n = int(n_values[c % len(n_values)])
        rng = policy.rng(c, f"multiplier/n={n}")
        ks, means, ses = _prefix_sup_curve(cls, dim, n, R_psi, rng)
        psi = _psi_from_curve(ks, means, ses, n)
        lhs_vals = np.empty(R_lhs)
        for r in range(R_lhs):
            cloud = PointCloud.uniform(n, dim, rng)
            lhs_vals[r] = _raw_sup(cloud, cls, law.sample(rng, n))
        lhs, lhs_se = float(lhs_vals.mean()), float(lhs_vals.std(ddof=1) / math.sqrt(R_lhs))
        if t_grid is None:
            rhs_tail = 4.0 * law.tail_integral(lambda s: psi(n * s))
        else:
            tg = np.asarray(t_grid, dtype=np.float64)
            xi_abs = np.abs(law.sample(np.random.default_rng(0), 200_000))
            surv = np.array([(xi_abs > t).mean() for t in tg])
            rhs_tail = 4.0 * float(np.trapezoid(psi(n * surv), tg))
        a = -np.sort(-np.abs(law.sample(rng, (R_order, n))), axis=1)
        incr = np.diff(psi(np.arange(n + 1)))
        order_vals = a @ incr
        rhs_order = float(order_vals.mean())
        rhs_order_se = float(order_vals.std(ddof=1) / math.sqrt(R_order))
        slack_tail = lhs - rhs_tail
        slack_order = lhs - rhs_order
        bad = slack_tail > 3.0 * lhs_se or slack_order > 3.0 * math.hypot(lhs_se, rhs_order_se)
        violations += int(bad)
        max_slack = max(max_slack, slack_tail, slack_order)
        rows.append({"n": n, "lhs": lhs, "lhs_se": lhs_se, "rhs_tail": rhs_tail,
                     "rhs_order": rhs_order, "rhs_order_se": rhs_order_se})
    return MultiplierCheck(violations, float(max_slack), rows)
