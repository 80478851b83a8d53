"""Closed-form rate exponents and bounds for set-structured empirical processes.

All predictions are exponent level: constants are unknown, so evaluators
are normalized to pass through a measured value at a reference sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

__all__ = [
    "RatePrediction",
    "LogBracket",
    "classical_gap_rates",
    "generic_ep_bounds",
    "chaining_bound",
    "set_sup_rate",
    "risk_rate",
    "sup_rate_prediction",
]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"entropy exponent must be positive and finite, got {alpha}")
    return alpha


@dataclass(frozen=True)
class RatePrediction:
    """Predicted behavior ``n ** exponent * log(n) ** log_power``.

    Attributes
    ----------
    context : str
        Which statement the prediction comes from.
    exponent : float
        Power of n.
    log_power : float
        Power of log n (0 when absent).
    sigma_exponent : float, optional
        Power of the localization radius, where relevant.
    """

    context: str
    exponent: float
    log_power: float = 0.0
    sigma_exponent: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.exponent) or not math.isfinite(self.log_power):
            raise ValueError("exponents must be finite")

    def shape(self, n: float) -> float:
        n = float(n)
        return n ** self.exponent * (math.log(n) ** self.log_power if self.log_power else 1.0)

    def evaluate(self, n: float, reference_n: float = 1.0, reference_value: float = 1.0) -> float:
        """Predicted value at ``n``, scaled to equal ``reference_value`` at ``reference_n``."""
        return reference_value * self.shape(n) / self.shape(reference_n)


def classical_gap_rates(alpha: float) -> Tuple[float, float, bool]:
    """Exponents of the minimax rate and of the classical ERM upper bound.

    Returns ``(lower, upper, log_flag)``: the minimax exponent
    ``-1/(2(1+alpha))``, the best available generic ERM exponent
    ``max(-1/(2(1+alpha)), -1/(4 alpha))`` and whether a square-root log
    factor appears (``alpha == 1``).
    """
    alpha = _check_alpha(alpha)
    lower = -1.0 / (2.0 * (1.0 + alpha))
    upper = max(lower, -1.0 / (4.0 * alpha))
    return lower, upper, alpha == 1.0


def generic_ep_bounds(alpha: float) -> Tuple[float, float]:
    """Growth exponents of the worst and best generic bounds on E sup |G_n|.

    For ``alpha > 1`` the supremum over a class with bracketing entropy
    ``eps^{-alpha}`` grows between ``n^{(alpha-1)/(2(alpha+1))}`` and
    ``n^{(alpha-1)/(2 alpha)}``.
    """
    alpha = _check_alpha(alpha)
    return (alpha - 1.0) / (2.0 * (alpha + 1.0)), (alpha - 1.0) / (2.0 * alpha)


def chaining_bound(alpha: float, p: float, sigma: float, n: float) -> float:
    """Bracketing chaining bound for a localized class with L_p-type entropy.

    With ``q = min(p, 2)``: for ``alpha < q`` the value is
    ``sigma^{(q - alpha)/2} + n^{-1/2} sigma^{-alpha}``; for ``alpha > q`` it is
    ``n^{(alpha - q)/(2(alpha + 2 - q))} + sigma^{-(alpha - q)/2} + n^{-1/2} sigma^{-alpha}``.
    """
    alpha = _check_alpha(alpha)
    q = min(float(p), 2.0)
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be at least 1")
    if alpha == q:
        raise ValueError("alpha = min(p, 2) is a boundary case with an unresolved log factor; no point bound")
    tail = n ** -0.5 * sigma ** -alpha
    if alpha < q:
        return sigma ** ((q - alpha) / 2.0) + tail
    return n ** ((alpha - q) / (2.0 * (alpha + 2.0 - q))) + sigma ** (-(alpha - q) / 2.0) + tail


@dataclass(frozen=True)
class LogBracket:
    """Growth known only up to ``lower <= E sup <= upper`` (boundary alpha = 1)."""

    lower: float
    upper: float


def set_sup_rate(alpha: float, sigma: float, n: float) -> Union[float, LogBracket]:
    """Order of E sup over a localized set class: ``max(sigma^{1-alpha}, n^{(alpha-1)/(2(alpha+1))})``.

    At ``alpha = 1`` both branches are constant and the true order is only
    known to lie between 1 and ``log n``; a :class:`LogBracket` is returned.
    """
    alpha = _check_alpha(alpha)
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    if alpha == 1.0:
        return LogBracket(1.0, max(1.0, math.log(n)))
    return max(sigma ** (1.0 - alpha), n ** ((alpha - 1.0) / (2.0 * (alpha + 1.0))))


def sup_rate_prediction(alpha: float) -> RatePrediction:
    """Growth of the unlocalized sup as a :class:`RatePrediction` (exponent 0 in the Donsker range)."""
    alpha = _check_alpha(alpha)
    return RatePrediction("set-sup", max(0.0, (alpha - 1.0) / (2.0 * (alpha + 1.0))),
                          1.0 if alpha == 1.0 else 0.0, sigma_exponent=min(0.0, 1.0 - alpha))


def risk_rate(model: str, params: Optional[dict] = None, n: Optional[float] = None) -> RatePrediction:
    """Risk rate of the estimators studied here.

    ``model`` is one of ``image``, ``edge``, ``classification`` (set ERMs,
    params ``alpha``), ``isotonic`` (params ``d``) or ``s-concave`` (params
    ``d``; formula only). ``n`` is accepted for interface symmetry; the
    returned prediction is evaluated via :meth:`RatePrediction.evaluate`.
    """
    params = dict(params or {})
    if model in ("image", "edge", "classification"):
        alpha = _check_alpha(params["alpha"])
        return RatePrediction(model, -1.0 / (alpha + 1.0))
    if model == "isotonic":
        d = int(params["d"])
        if d < 2:
            raise ValueError("isotonic rates are stated for d >= 2")
        return RatePrediction(model, -1.0 / d, 2.0 if d == 2 else 1.0)
    if model == "s-concave":
        d = int(params["d"])
        if d < 2:
            raise ValueError("s-concave rates are stated for d >= 2")
        gamma = {2: 2.0 / 3.0, 3: 2.0}.get(d, 1.0)
        return RatePrediction(model, -2.0 / (d + 1.0), gamma)
    raise ValueError(f"unknown model {model!r}")
