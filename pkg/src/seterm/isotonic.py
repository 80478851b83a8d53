"""Exact least squares isotonic regression on a dominance poset.

The fit is computed by recursive partitioning. For a block B with mean mu,
the up-set U of B maximizing sum_{U} (Y_i - mu) is found with one min cut.
If its gain is positive, the projection takes values >= mu on U and <= mu
on B \\ U and the two halves are solved independently; otherwise B is a
level set. Optimality is certified independently: f is the projection iff
it is monotone, residuals sum to zero on every level set, and no up-set
carries a positive residual sum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .closure import SelectionKind, WeightedInstance, max_weight_closed_mask, max_weight_up_set
from .flow import QUANTUM
from .model_core import DominancePoset, PointCloud, build_dominance_poset
from .sets import Risk

__all__ = [
    "IsotonicFit",
    "isotonic_fit",
    "certify_optimality",
    "pava_chain",
    "predict",
    "l2_risk",
    "default_truth",
    "IsotonicRegressorND",
    "CERTIFICATE_TOL",
]

CERTIFICATE_TOL = 1e-8
VALUE_QUANTUM = 1e-12


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    """Level-set structure of an isotonic fit.

    Attributes
    ----------
    node_fitted : ndarray of shape (m,)
        Fitted value per poset node (merged duplicate points share a node).
    blocks : list of ndarray
        Level sets, as arrays of node indices, in increasing value order.
    block_values : ndarray
        Fitted value of each block.
    node_of : ndarray of shape (n,)
        Node of each sample point.
    support : ndarray of shape (m, d) or None
        Node coordinates, used by the out-of-sample rule.
    certificate_slack : float
        Optimality certificate (nan when not computed).
    """

    node_fitted: np.ndarray
    blocks: list
    block_values: np.ndarray
    node_of: np.ndarray
    support: Optional[np.ndarray] = None
    certificate_slack: float = math.nan

    @property
    def fitted(self) -> np.ndarray:
        """Fitted value per sample point."""
        return self.node_fitted[self.node_of]

    def with_slack(self, slack: float) -> "IsotonicFit":
        return IsotonicFit(self.node_fitted, self.blocks, self.block_values, self.node_of,
                           self.support, float(slack))

    def to_json(self) -> str:
        return json.dumps({
            "blocks": [b.tolist() for b in self.blocks],
            "values": self.block_values.tolist(),
            "certificate_slack": None if math.isnan(self.certificate_slack) else self.certificate_slack,
        })


def _level_sets(node_fitted: np.ndarray):
    order = np.argsort(node_fitted, kind="stable")
    vals = node_fitted[order]
    cuts = np.flatnonzero(np.diff(vals) > VALUE_QUANTUM) + 1
    groups = np.split(order, cuts)
    blocks = [np.sort(g) for g in groups]
    return blocks


def _assemble(node_fitted, sums, counts, node_of, support) -> IsotonicFit:
    blocks = _level_sets(node_fitted)
    values = np.array([sums[b].sum() / counts[b].sum() for b in blocks])
    for b, v in zip(blocks, values):
        node_fitted[b] = v
    return IsotonicFit(node_fitted, blocks, values, node_of, support)


def _responses(poset: DominancePoset, responses) -> np.ndarray:
    y = np.asarray(responses, dtype=np.float64).reshape(-1)
    if y.shape[0] != poset.n_points:
        raise ValueError(f"{poset.n_points} points but {y.shape[0]} responses")
    if not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite")
    return y


def isotonic_fit(poset: DominancePoset, responses, certify: bool = True) -> IsotonicFit:
    """Euclidean projection of the responses onto monotone functions on the poset."""
    y = _responses(poset, responses)
    sums = poset.aggregate(y)
    counts = poset.multiplicity.astype(np.float64)
    m = poset.n
    fitted = np.empty(m)
    local = np.full(m, -1, dtype=np.int64)
    edges = poset.edges
    stack = [np.arange(m)]
    while stack:
        block = stack.pop()
        mu = sums[block].sum() / counts[block].sum()
        if block.size == 1:
            fitted[block] = mu
            continue
        w = sums[block] - mu * counts[block]
        local[block] = np.arange(block.size)
        inside = (local[edges[:, 0]] >= 0) & (local[edges[:, 1]] >= 0)
        sub_edges = local[edges[inside]]
        upper = max_weight_closed_mask(block.size, sub_edges, w, SelectionKind.UP)
        local[block] = -1
        gain = float(w[upper].sum())
        tol = QUANTUM * (block.size + float(np.abs(w).sum()))
        if gain <= tol or upper.all() or not upper.any():
            fitted[block] = mu
            continue
        stack.append(block[~upper])
        stack.append(block[upper])
    fit = _assemble(fitted, sums, counts, poset.node_of, poset.node_points)
    if certify:
        fit = fit.with_slack(certify_optimality(poset, y, fit))
    return fit


def certify_optimality(poset: DominancePoset, responses, fit: IsotonicFit) -> float:
    """Certificate slack of a candidate fit (0 for the exact projection).

    The slack is the larger of the best up-set residual sum (one min cut)
    and the largest absolute residual sum over a level set. Raises
    ``ValueError`` when the fit is not monotone.
    """
    y = _responses(poset, responses)
    f = np.asarray(fit.node_fitted, dtype=np.float64)
    if f.shape[0] != poset.n:
        raise ValueError("fit does not match the poset")
    lo, hi = poset.edges[:, 0], poset.edges[:, 1]
    if np.any(f[lo] > f[hi] + VALUE_QUANTUM):
        raise ValueError("fit is not monotone on the poset")
    resid = poset.aggregate(y) - poset.multiplicity * f
    sel = max_weight_up_set(WeightedInstance(poset, resid), allow_empty=True)
    slack = max(0.0, float(resid[sel.nodes].sum()) if sel.nodes is not None and sel.nodes.size else 0.0)
    for b in _level_sets(f):
        slack = max(slack, abs(float(resid[b].sum())))
    return slack


def pava_chain(responses, weights=None) -> IsotonicFit:
    """Pool adjacent violators for a totally ordered sequence."""
    y = np.asarray(responses, dtype=np.float64).reshape(-1)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("need a nonempty 1-D response vector")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape != y.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and match the responses")
    sums, wts, starts = [], [], []
    for i in range(y.size):
        sums.append(y[i] * w[i])
        wts.append(w[i])
        starts.append(i)
        while len(sums) > 1 and sums[-2] / wts[-2] >= sums[-1] / wts[-1]:
            s, c = sums.pop(), wts.pop()
            starts.pop()
            sums[-1] += s
            wts[-1] += c
    fitted = np.empty_like(y)
    bounds = starts + [y.size]
    for k in range(len(starts)):
        fitted[bounds[k]:bounds[k + 1]] = sums[k] / wts[k]
    node_of = np.arange(y.size)
    return _assemble(fitted, y * w, w, node_of, None)


def predict(fit: IsotonicFit, x, poset: Optional[DominancePoset] = None) -> np.ndarray:
    """Minimal monotone extension: max fitted value over dominated support points.

    Points dominating no support point get the smallest fitted value.
    Accepts one point of shape (d,) or a batch of shape (q, d).
    """
    support = fit.support if poset is None else poset.node_points
    if support is None:
        raise ValueError("fit carries no support points; pass the poset")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != support.shape[1]:
        raise ValueError(f"expected points of dimension {support.shape[1]}")
    f = fit.node_fitted
    floor = float(f.min())
    out = np.empty(x.shape[0])
    chunk = max(1, 4_000_000 // max(1, support.shape[0] * support.shape[1]))
    for lo in range(0, x.shape[0], chunk):
        q = x[lo:lo + chunk]
        dom = np.all(support[None, :, :] <= q[:, None, :], axis=2)
        vals = np.where(dom, f[None, :], -np.inf).max(axis=1)
        out[lo:lo + chunk] = np.where(np.isfinite(vals), vals, floor)
    return out[0] if single else out


def default_truth(x) -> np.ndarray:
    """Monotone truth ``clip(sum(x) - d/2, -1, 1)``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.clip(x.sum(axis=1) - x.shape[1] / 2.0, -1.0, 1.0)


def l2_risk(fit: IsotonicFit, f0: Optional[Callable] = None, n_mc: int = 20_000,
            seed: Optional[int] = None, poset: Optional[DominancePoset] = None,
            estimate: Optional[Callable] = None) -> Risk:
    """Monte Carlo estimate of the squared L2 distance to ``f0`` under the uniform law.

    ``estimate`` overrides the fitted rule (any callable on point batches).
    """
    f0 = default_truth if f0 is None else f0
    support = fit.support if poset is None else poset.node_points
    if support is None:
        raise ValueError("fit carries no support points; pass the poset")
    rng = np.random.default_rng(seed)
    x = rng.random((int(n_mc), support.shape[1]))
    fhat = estimate(x) if estimate is not None else predict(fit, x, poset)
    sq = (np.asarray(fhat, dtype=np.float64) - np.asarray(f0(x), dtype=np.float64)) ** 2
    return Risk(float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else 0.0)


class IsotonicRegressorND(BaseEstimator, RegressorMixin):
    """Least squares regression under componentwise monotonicity.

    Parameters
    ----------
    certify : bool, default=True
        Compute the optimality certificate after fitting.
    tol : float, default=1e-8
        Largest acceptable certificate slack; fitting fails above it.
    """

    def __init__(self, certify: bool = True, tol: float = CERTIFICATE_TOL):
        self.certify = certify
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("features must lie in [0, 1]^d")
        self.poset_ = build_dominance_poset(PointCloud(X))
        self.fit_ = isotonic_fit(self.poset_, y, certify=self.certify)
        if self.certify and not self.fit_.certificate_slack <= self.tol:
            raise ArithmeticError(f"certificate slack {self.fit_.certificate_slack:.3g} exceeds {self.tol:.3g}")
        self.certificate_slack_ = self.fit_.certificate_slack
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_")
        X = check_array(X, dtype=np.float64)
        return predict(self.fit_, X, self.poset_)
