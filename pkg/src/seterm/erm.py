"""Global empirical risk minimizers over set classes.

Each loss is affine in the indicator vector of the candidate set, so every
ERM reduces to one call of a maximum-weight set oracle:

* image model, ``Y = 1_C0(X) + noise``: weights ``2Y - 1``;
* edge model, ``Y = f_C0(X) * eta`` with ``f_C = 2 1_C - 1``: weights ``Y``
  (the minimizer does not depend on ``a``);
* classification with 0/1 loss: weights ``2Y - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .closure import SelectionKind, SetSelection, WeightedInstance, max_weight_down_set, max_weight_up_set
from .convex import convex_hull_indices, max_weight_convex_subset_2d, snap
from .model_core import DominancePoset, PointCloud, SetClassDescriptor, SetClassKind, build_dominance_poset
from .sets import ConvexPolygon, Staircase

__all__ = [
    "RegressionSample",
    "max_weight_set",
    "image_lse",
    "edge_lse",
    "classification_erm",
    "image_loss",
    "edge_loss",
    "classification_loss",
    "canonical_extension",
    "estimated_set",
    "selection_to_json",
    "SetImageRegressor",
    "SetEdgeRegressor",
    "SetClassifier",
]

MODELS = ("image", "edge", "classification")


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """Design points with responses for one of the three set models.

    ``a`` is the edge-model signal level in (0, 1/2]; ``b`` the
    classification margin in (0, 1/2].
    """

    cloud: PointCloud
    responses: np.ndarray
    model: str = "image"
    a: Optional[float] = None
    b: Optional[float] = None
    _poset: Optional[DominancePoset] = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.cloud, PointCloud):
            object.__setattr__(self, "cloud", PointCloud(self.cloud))
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if y.shape[0] != self.cloud.n:
            raise ValueError(f"{self.cloud.n} points but {y.shape[0]} responses")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model == "edge":
            if self.a is not None and not 0 < self.a <= 0.5:
                raise ValueError("edge model needs a in (0, 1/2]")
            if not np.all(np.abs(y) == 1.0):
                raise ValueError("edge-model responses take values in {-1, +1}")
        if self.model == "classification":
            if self.b is not None and not 0 < self.b <= 0.5:
                raise ValueError("margin b must lie in (0, 1/2]")
            if not np.all((y == 0.0) | (y == 1.0)):
                raise ValueError("classification labels must be 0 or 1")
        y.setflags(write=False)
        object.__setattr__(self, "responses", y)

    @property
    def poset(self) -> DominancePoset:
        if self._poset is None:
            object.__setattr__(self, "_poset", build_dominance_poset(self.cloud))
        return self._poset


def _descriptor(cls: Union[SetClassDescriptor, str], dim: int) -> SetClassDescriptor:
    if isinstance(cls, SetClassDescriptor):
        if cls.dim != dim:
            raise ValueError(f"class is defined in d = {cls.dim} but the sample has d = {dim}")
        return cls
    return SetClassDescriptor(SetClassKind(cls), dim)


def max_weight_set(cloud: PointCloud, cls, point_weights, poset: Optional[DominancePoset] = None,
                   allow_empty: bool = True) -> SetSelection:
    """Sample trace of a class member maximizing the summed point weights."""
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    desc = _descriptor(cls, cloud.dim)
    if desc.kind is SetClassKind.CONVEX2D:
        if not allow_empty:
            raise ValueError("the convex oracle always admits the empty set")
        return max_weight_convex_subset_2d(cloud, point_weights)
    if poset is None:
        poset = build_dominance_poset(cloud)
    inst = WeightedInstance.from_points(poset, point_weights)
    if desc.kind is SetClassKind.LOWER:
        return max_weight_down_set(inst, allow_empty=allow_empty)
    return max_weight_up_set(inst, allow_empty=allow_empty)


def _check_model(sample: RegressionSample, model: str) -> None:
    if sample.model != model:
        raise ValueError(f"expected a {model!r} sample, got {sample.model!r}")


def _poset_for(sample: RegressionSample, desc: SetClassDescriptor):
    return None if desc.kind is SetClassKind.CONVEX2D else sample.poset


def image_lse(sample: RegressionSample, cls) -> SetSelection:
    """Least squares set under the image model."""
    _check_model(sample, "image")
    desc = _descriptor(cls, sample.cloud.dim)
    return max_weight_set(sample.cloud, desc, 2.0 * sample.responses - 1.0, _poset_for(sample, desc))


def edge_lse(sample: RegressionSample, cls) -> SetSelection:
    """Least squares set under the edge model (independent of ``a``)."""
    _check_model(sample, "edge")
    desc = _descriptor(cls, sample.cloud.dim)
    return max_weight_set(sample.cloud, desc, sample.responses, _poset_for(sample, desc))


def classification_erm(sample: RegressionSample, cls) -> SetSelection:
    """Set classifier minimizing the number of training errors."""
    _check_model(sample, "classification")
    desc = _descriptor(cls, sample.cloud.dim)
    return max_weight_set(sample.cloud, desc, 2.0 * sample.responses - 1.0, _poset_for(sample, desc))


def _indicator(sel_or_mask, n: int) -> np.ndarray:
    if isinstance(sel_or_mask, SetSelection):
        return sel_or_mask.mask(n).astype(np.float64)
    return np.asarray(sel_or_mask, dtype=bool).astype(np.float64)


def image_loss(sample: RegressionSample, selection) -> float:
    ind = _indicator(selection, sample.cloud.n)
    return float(np.sum((sample.responses - ind) ** 2))


def edge_loss(sample: RegressionSample, selection, a: Optional[float] = None) -> float:
    a = sample.a if a is None else a
    if a is None:
        raise ValueError("edge loss needs the signal level a")
    ind = _indicator(selection, sample.cloud.n)
    return float(np.sum((sample.responses - 2.0 * a * (2.0 * ind - 1.0)) ** 2))


def classification_loss(sample: RegressionSample, selection) -> int:
    ind = _indicator(selection, sample.cloud.n)
    return int(np.count_nonzero(sample.responses != ind))


def canonical_extension(selection: SetSelection, cloud: PointCloud) -> Staircase:
    """Smallest lower (or upper) set containing the selected points."""
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if selection.kind is SelectionKind.DOWN:
        orientation = "lower"
    elif selection.kind is SelectionKind.UP:
        orientation = "upper"
    else:
        raise ValueError(f"staircase extension needs a down-set or up-set, got {selection.kind.value}")
    return Staircase(cloud.dim, cloud.points[selection.indices], orientation)


def _hull_polygon(selection: SetSelection, cloud: PointCloud) -> ConvexPolygon:
    if len(selection) == 0:
        return ConvexPolygon(np.empty((0, 2)))
    hull = convex_hull_indices(snap(cloud), selection.indices)
    return ConvexPolygon(cloud.points[np.asarray(hull, dtype=np.int64)])


def estimated_set(selection: SetSelection, cloud: PointCloud) -> Union[Staircase, ConvexPolygon]:
    """Canonical geometric representative of a selection.

    Down-sets and up-sets extend to their minimal staircase; convex-position
    selections to the convex hull of the selected points.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if selection.kind is SelectionKind.CONVEX:
        return _hull_polygon(selection, cloud)
    return canonical_extension(selection, cloud)


def selection_to_json(selection: SetSelection, cloud: PointCloud) -> str:
    shape = estimated_set(selection, cloud)
    doc = {
        "kind": selection.kind.value,
        "objective": selection.objective_value,
        "indices": selection.indices.tolist(),
    }
    if isinstance(shape, Staircase):
        doc["orientation"] = shape.orientation
        doc["corners"] = shape.corners.tolist()
    else:
        doc["vertices"] = shape.vertices.tolist()
    return json.dumps(doc)


# scikit-learn estimators ---------------------------------------------------


def _check_cube(X) -> np.ndarray:
    X = check_array(X, dtype=np.float64)
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("features must lie in [0, 1]^d")
    return X


class _SetEstimatorBase(BaseEstimator):
    _model = "image"

    def __init__(self, set_class: str = "lower"):
        self.set_class = set_class

    def _fit_selection(self, X, y, weights):
        X, y = check_X_y(X, y, dtype=np.float64)
        X = _check_cube(X)
        cloud = PointCloud(X)
        desc = SetClassDescriptor(SetClassKind(self.set_class), cloud.dim)
        self.selection_ = max_weight_set(cloud, desc, weights(y))
        self.set_ = estimated_set(self.selection_, cloud)
        self.n_features_in_ = cloud.dim
        return self

    def contains(self, X) -> np.ndarray:
        """Membership of new points in the fitted set."""
        check_is_fitted(self, "set_")
        X = _check_cube(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if isinstance(self.set_, ConvexPolygon):
            return _polygon_contains_closed(self.set_, X)
        return self.set_.contains(X)


def _polygon_contains_closed(poly: ConvexPolygon, X: np.ndarray) -> np.ndarray:
    v = poly.vertices
    if v.shape[0] >= 3:
        return poly.contains(X)
    # degenerate hulls: a point or a segment
    if v.shape[0] == 0:
        return np.zeros(X.shape[0], dtype=bool)
    if v.shape[0] == 1:
        return np.all(X == v[0], axis=1)
    a, b = v[0], v[1]
    cross = (b[0] - a[0]) * (X[:, 1] - a[1]) - (b[1] - a[1]) * (X[:, 0] - a[0])
    dot = (X - a) @ (b - a)
    return (cross == 0) & (dot >= 0) & (dot <= (b - a) @ (b - a))


class SetImageRegressor(_SetEstimatorBase, RegressorMixin):
    """Least squares estimator of a set observed through additive noise.

    Parameters
    ----------
    set_class : {"lower", "upper", "convex2d"}
        Class of candidate sets.

    Attributes
    ----------
    selection_ : SetSelection
        Selected sample points.
    set_ : Staircase or ConvexPolygon
        Canonical geometric representative of the selection.
    """

    def fit(self, X, y):
        return self._fit_selection(X, y, lambda v: 2.0 * v - 1.0)

    def predict(self, X) -> np.ndarray:
        return self.contains(X).astype(np.float64)


class SetEdgeRegressor(_SetEstimatorBase, RegressorMixin):
    """Least squares set estimator for the bounded edge model.

    Parameters
    ----------
    set_class : {"lower", "upper", "convex2d"}
    a : float, default=0.25
        Signal level; only scales predictions, the fitted set ignores it.
    """

    def __init__(self, set_class: str = "lower", a: float = 0.25):
        super().__init__(set_class)
        self.a = a

    def fit(self, X, y):
        if not 0 < self.a < 0.5:
            raise ValueError("a must lie in (0, 1/2)")
        return self._fit_selection(X, y, lambda v: v)

    def predict(self, X) -> np.ndarray:
        return 2.0 * self.a * (2.0 * self.contains(X).astype(np.float64) - 1.0)


class SetClassifier(_SetEstimatorBase, ClassifierMixin):
    """Empirical risk minimizing set classifier (0/1 labels)."""

    def fit(self, X, y):
        y_arr = np.asarray(y)
        if not np.all(np.isin(y_arr, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        self.classes_ = np.array([0, 1])
        return self._fit_selection(X, y, lambda v: 2.0 * v - 1.0)

    def predict(self, X) -> np.ndarray:
        return self.contains(X).astype(np.int64)
