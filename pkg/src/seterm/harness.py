"""Simulation harness: data generators, experiment runner and rate fitting.

Every replicate draws from its own stream derived from the master seed, the
sample size and the replicate index, so results do not depend on execution
order or on the number of worker processes. Floats are written with
``repr`` and rows are sorted, which makes reruns byte identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .erm import RegressionSample, classification_erm, edge_lse, estimated_set, image_lse
from .ep_suprema import (SUP_CSV_FIELDS, greedy_packing_entropy, multiplier_inequality_check,
                         symmetrized_sup)
from .isotonic import CERTIFICATE_TOL, default_truth, isotonic_fit, l2_risk
from .model_core import (PointCloud, SeedPolicy, SetClassDescriptor, SetClassKind,
                         build_dominance_poset)
from .sets import HalfSpaceSet, symmetric_difference_risk
from .theory import RatePrediction, risk_rate, sup_rate_prediction

__all__ = [
    "KINDS",
    "SpecError",
    "CertificateError",
    "ExperimentSpec",
    "RateFit",
    "ExperimentResult",
    "truth_set",
    "generate_image_data",
    "generate_edge_data",
    "generate_classification_data",
    "generate_isotonic_data",
    "replications_for",
    "run_experiment",
    "fit_rate",
    "theory_prediction",
    "RAW_FIELDS",
    "AGGREGATE_FIELDS",
]

KINDS = ("image", "edge", "classification", "isotonic", "ep_sup", "entropy", "multiplier_check")
RAW_FIELDS = ["kind", "class", "d", "alpha", "n", "replicate", "seed", "metric", "value"]
AGGREGATE_FIELDS = ["kind", "class", "d", "alpha", "n", "mean", "stderr"]
MIN_REPLICATIONS = 30
PRIMARY_METRIC = {
    "image": "risk",
    "edge": "risk",
    "classification": "excess_risk",
    "isotonic": "l2_risk",
    "ep_sup": "sup",
    "entropy": "alpha_hat",
    "multiplier_check": "violation",
}


class SpecError(ValueError):
    """Invalid experiment specification."""


class CertificateError(ArithmeticError):
    """A numerical optimality certificate failed."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one simulation study.

    ``replications`` is the count at the smallest n; larger n use
    ``max(30, replications * n_grid[0] / n)`` replicates.
    """

    kind: str
    set_class: str = "lower"
    d: int = 2
    n_grid: tuple = (64, 128)
    replications: int = 60
    noise_sd: float = 1.0
    a: float = 0.25
    b: float = 0.2
    seed: int = 0
    out: Optional[str] = None
    eval_points: int = 20_000
    risk_mode: str = "exact"
    law: str = "rademacher"
    family_size: int = 4000

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise SpecError("n_grid must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise SpecError("n_grid must be strictly increasing")
        smoke = self.kind == "ep_sup" and max(self.n_grid) <= 64
        if self.replications < (2 if smoke else MIN_REPLICATIONS):
            raise SpecError(f"replications must be at least {MIN_REPLICATIONS} (got {self.replications})")
        if self.kind != "isotonic":
            try:
                SetClassDescriptor(SetClassKind(self.set_class), self.d)
            except ValueError as exc:
                raise SpecError(str(exc)) from None
        elif self.d < 2:
            raise SpecError("isotonic experiments need d >= 2")
        if not self.noise_sd >= 0:
            raise SpecError("noise_sd must be nonnegative")
        if not 0 < self.a <= 0.5:
            raise SpecError("a must lie in (0, 1/2]")
        if not 0 < self.b <= 0.5:
            raise SpecError("b must lie in (0, 1/2]")
        if not 0 <= self.seed < 2**64:
            raise SpecError("seed must be an unsigned 64-bit integer")
        if self.risk_mode not in ("exact", "monte_carlo"):
            raise SpecError("risk_mode must be 'exact' or 'monte_carlo'")
        if self.law not in ("rademacher", "gaussian"):
            raise SpecError("law must be 'rademacher' or 'gaussian'")
        if self.eval_points < 100:
            raise SpecError("eval_points must be at least 100")

    @property
    def descriptor(self) -> Optional[SetClassDescriptor]:
        if self.kind == "isotonic":
            return None
        return SetClassDescriptor(SetClassKind(self.set_class), self.d)

    @property
    def class_label(self) -> str:
        return "monotone" if self.kind == "isotonic" else self.set_class

    @property
    def alpha(self) -> float:
        desc = self.descriptor
        return float("nan") if desc is None else desc.alpha

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        if "class" in data:
            data["set_class"] = data.pop("class")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        conv = {"d": int, "replications": int, "seed": int, "eval_points": int, "family_size": int,
                "noise_sd": float, "a": float, "b": float}
        try:
            for k, f in conv.items():
                if k in data:
                    data[k] = f(data[k])
            if "n_grid" in data and isinstance(data["n_grid"], str):
                data["n_grid"] = [int(v) for v in data["n_grid"].replace(" ", "").split(",") if v]
        except (TypeError, ValueError) as exc:
            raise SpecError(f"malformed spec value: {exc}") from None
        if "kind" not in data:
            raise SpecError("spec needs a 'kind'")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


def replications_for(spec: ExperimentSpec, n: int) -> int:
    if spec.replications < MIN_REPLICATIONS:
        return spec.replications
    return max(MIN_REPLICATIONS, int(round(spec.replications * spec.n_grid[0] / n)))


def truth_set(spec: ExperimentSpec) -> HalfSpaceSet:
    """Default truth: ``{sum(x) <= d/2}`` (its complement-type mirror for upper sets)."""
    return HalfSpaceSet(spec.d, spec.d / 2.0, upper=spec.set_class == "upper")


def _stream(spec: ExperimentSpec, n: int, replicate: int, purpose: str):
    policy = SeedPolicy(spec.seed)
    tag = f"{spec.kind}/{spec.class_label}/d={spec.d}/n={n}/{purpose}"
    return policy.rng(replicate, tag), policy.derive(replicate, tag)


def generate_image_data(spec: ExperimentSpec, n: int, replicate: int) -> RegressionSample:
    """``Y = 1_C0(X) + noise_sd * N(0, 1)`` on a uniform design."""
    rng, _ = _stream(spec, n, replicate, "data")
    x = rng.random((n, spec.d))
    y = truth_set(spec).contains(x).astype(np.float64)
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(n)
    return RegressionSample(PointCloud(x), y, "image")


def generate_edge_data(spec: ExperimentSpec, n: int, replicate: int) -> RegressionSample:
    """``Y = f_C0(X) * eta`` with ``P(eta = 1) = 1/2 + a``, so ``E[Y | X] = 2a f_C0(X)``."""
    rng, _ = _stream(spec, n, replicate, "data")
    x = rng.random((n, spec.d))
    f = 2.0 * truth_set(spec).contains(x) - 1.0
    eta = np.where(rng.random(n) < 0.5 + spec.a, 1.0, -1.0)
    return RegressionSample(PointCloud(x), f * eta, "edge", a=spec.a)


def generate_classification_data(spec: ExperimentSpec, n: int, replicate: int) -> RegressionSample:
    """Labels with ``P(Y = 1 | X) = 1/2 + b (2 1_C0(X) - 1)``."""
    rng, _ = _stream(spec, n, replicate, "data")
    x = rng.random((n, spec.d))
    eta = 0.5 + spec.b * (2.0 * truth_set(spec).contains(x) - 1.0)
    y = (rng.random(n) < eta).astype(np.float64)
    return RegressionSample(PointCloud(x), y, "classification", b=spec.b)


def generate_isotonic_data(spec: ExperimentSpec, n: int, replicate: int):
    """``Y = f0(X) + noise_sd * N(0, 1)`` with the default monotone truth."""
    rng, _ = _stream(spec, n, replicate, "data")
    x = rng.random((n, spec.d))
    y = default_truth(x)
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(n)
    cloud = PointCloud(x)
    return build_dominance_poset(cloud), y


def _set_risk(spec: ExperimentSpec, sample: RegressionSample, selection, n: int, replicate: int) -> float:
    est = estimated_set(selection, sample.cloud)
    truth = truth_set(spec)
    if spec.risk_mode == "exact" and spec.d <= 3:
        return symmetric_difference_risk(est, truth).value
    _, eval_seed = _stream(spec, n, replicate, "risk")
    return symmetric_difference_risk(est, truth, "monte_carlo", n_mc=200 * n, seed=eval_seed).value


def _run_replicate(args) -> list:
    spec, n, r = args
    _, seed = _stream(spec, n, r, "data")
    rows = []
    kind = spec.kind
    if kind in ("image", "edge", "classification"):
        gen = {"image": generate_image_data, "edge": generate_edge_data,
               "classification": generate_classification_data}[kind]
        est = {"image": image_lse, "edge": edge_lse, "classification": classification_erm}[kind]
        sample = gen(spec, n, r)
        sel = est(sample, spec.descriptor)
        risk = _set_risk(spec, sample, sel, n, r)
        if kind == "classification":
            rows.append(("excess_risk", 2.0 * spec.b * risk))
        rows.append(("risk", risk))
    elif kind == "isotonic":
        poset, y = generate_isotonic_data(spec, n, r)
        fit = isotonic_fit(poset, y)
        if not fit.certificate_slack <= CERTIFICATE_TOL:
            raise CertificateError(f"isotonic certificate slack {fit.certificate_slack:.3g} at n={n}, replicate {r}")
        _, eval_seed = _stream(spec, n, r, "risk")
        rows.append(("l2_risk", l2_risk(fit, n_mc=spec.eval_points, seed=eval_seed).value))
        rows.append(("certificate_slack", fit.certificate_slack))
    elif kind == "ep_sup":
        rng, _ = _stream(spec, n, r, "data")
        cloud = PointCloud.uniform(n, spec.d, rng)
        xi = rng.standard_normal(n) if spec.law == "gaussian" else np.where(rng.random(n) < 0.5, -1.0, 1.0)
        rows.append(("sup", symmetrized_sup(cloud, spec.descriptor, xi)))
    elif kind == "entropy":
        rng, _ = _stream(spec, n, r, "data")
        cloud = PointCloud.uniform(n, spec.d, rng)
        est = greedy_packing_entropy(spec.descriptor, cloud, family_size=spec.family_size,
                                     seed=int(rng.integers(2**63)))
        rows.append(("alpha_hat", est.alpha_hat))
        rows.append(("alpha_raw", est.alpha_raw))
    elif kind == "multiplier_check":
        _, cfg_seed = _stream(spec, n, r, "config")
        res = multiplier_inequality_check(spec.descriptor, spec.d, spec.law, [n], 1, seed=cfg_seed)
        row = res.rows[0]
        rows += [("violation", float(res.violations)), ("lhs", row["lhs"]), ("lhs_se", row["lhs_se"]),
                 ("rhs_tail", row["rhs_tail"]), ("rhs_order", row["rhs_order"])]
    return [(n, r, seed, m, float(v)) for m, v in rows]


@dataclass(frozen=True)
class RateFit:
    """Weighted least squares fit of ``log value = intercept + slope * log n``."""

    slope: float
    intercept: float
    slope_se: float
    n_grid: np.ndarray
    means: np.ndarray
    ses: np.ndarray

    def predict(self, n) -> np.ndarray:
        return np.exp(self.intercept + self.slope * np.log(np.asarray(n, dtype=np.float64)))

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "slope_se": self.slope_se,
                "n_grid": [int(v) for v in self.n_grid], "means": [float(v) for v in self.means],
                "ses": [float(v) for v in self.ses]}


def fit_rate(n_grid, means, ses) -> RateFit:
    """Fit a power law by weighted least squares on the log-log scale.

    The variance of ``log mean`` is taken as ``(se / mean)^2`` (delta
    method) and the slope standard error as ``1 / sqrt(sum w (x - xbar)^2)``.
    Relative errors are floored at 1e-12 so that exact data keep a positive
    standard error.
    """
    n_grid = np.asarray(n_grid, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    ses = np.asarray(ses, dtype=np.float64)
    if n_grid.size < 2 or n_grid.shape != means.shape or means.shape != ses.shape:
        raise ValueError("need at least two (n, mean, se) triples of equal length")
    if np.any(means <= 0) or np.any(n_grid <= 0):
        raise ValueError("power-law fit needs positive n and means")
    x = np.log(n_grid)
    y = np.log(means)
    rel = np.maximum(ses / means, 1e-12)
    w = 1.0 / rel**2
    w = w / w.max()
    xbar = np.sum(w * x) / np.sum(w)
    ybar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    # undo the normalization of the weights for the standard error
    scale = 1.0 / rel.min() ** 2
    se = float(1.0 / math.sqrt(sxx * scale))
    return RateFit(slope, float(ybar - slope * xbar), se, n_grid, means, ses)


def theory_prediction(spec: ExperimentSpec) -> Optional[RatePrediction]:
    """Predicted exponent for the spec's statistic (None when not rate-based)."""
    if spec.kind in ("image", "edge", "classification"):
        return risk_rate(spec.kind, {"alpha": spec.alpha})
    if spec.kind == "isotonic":
        return risk_rate("isotonic", {"d": spec.d})
    if spec.kind == "ep_sup":
        return sup_rate_prediction(spec.alpha)
    return None


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    raw: list
    aggregate: list
    fit: Optional[RateFit] = None
    theory: Optional[RatePrediction] = None
    statistic: str = "mean"
    extra: dict = field(default_factory=dict)

    def raw_csv(self) -> str:
        return _csv_text(RAW_FIELDS, self.raw)

    def aggregate_csv(self) -> str:
        return _csv_text(AGGREGATE_FIELDS, self.aggregate)

    def summary(self) -> dict:
        out = {"spec": self.spec.to_dict(), "statistic": self.statistic}
        if self.fit is not None:
            out["fit"] = self.fit.to_dict()
        if self.theory is not None:
            out["theory"] = {"context": self.theory.context, "exponent": self.theory.exponent,
                             "log_power": self.theory.log_power}
        out.update(self.extra)
        return out

    def gnuplot_table(self) -> str:
        """Whitespace table: n, statistic, stderr, fitted line, theory curve."""
        if self.fit is None:
            return ""
        f = self.fit
        lines = [f"# {self.spec.kind} {self.spec.class_label} d={self.spec.d}",
                 f"# fit: log y = {f.intercept!r} + {f.slope!r} log n  (slope se {f.slope_se!r})"]
        if self.theory is not None:
            lines.append(f"# theory exponent {self.theory.exponent!r}, log power {self.theory.log_power!r}")
        lines.append("# n value stderr fitted theory")
        for n, m, s in zip(f.n_grid, f.means, f.ses):
            th = (self.theory.evaluate(n, f.n_grid[0], f.means[0]) if self.theory is not None else float("nan"))
            lines.append(f"{int(n)} {m!r} {s!r} {float(f.predict(n))!r} {th!r}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Union[str, Path], fmt: str = "csv") -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "json":
            (out / "raw.json").write_text(json.dumps([dict(zip(RAW_FIELDS, r)) for r in self.raw], indent=1))
            (out / "aggregate.json").write_text(
                json.dumps([dict(zip(AGGREGATE_FIELDS, r)) for r in self.aggregate], indent=1))
            written += [out / "raw.json", out / "aggregate.json"]
        else:
            (out / "raw.csv").write_text(self.raw_csv())
            (out / "aggregate.csv").write_text(self.aggregate_csv())
            written += [out / "raw.csv", out / "aggregate.csv"]
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=1, sort_keys=True))
        written.append(out / "summary.json")
        table = self.gnuplot_table()
        if table:
            name = f"{self.spec.kind}_{self.spec.class_label}_d{self.spec.d}.dat"
            (out / name).write_text(table)
            written.append(out / name)
        if self.spec.kind == "ep_sup":
            rows = [[self.spec.class_label, self.spec.d, repr(self.spec.alpha), int(a[4]), repr(1.0),
                     replications_for(self.spec, int(a[4])), a[5], a[6], self.spec.seed]
                    for a in self.aggregate]
            (out / "ep_sup.csv").write_text(_csv_text(SUP_CSV_FIELDS, rows))
            written.append(out / "ep_sup.csv")
        return written


def _csv_text(fields: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Run every (n, replicate) task, aggregate per n and fit the growth rate.

    Classification uses the per-n median of the excess risk for the rate
    fit (standard error from the normal approximation ``1.2533 sd / sqrt(R)``);
    every other kind uses the mean.
    """
    spec.validate()
    tasks = [(spec, n, r) for n in spec.n_grid for r in range(replications_for(spec, n))]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_replicate, tasks, chunksize=1))
    else:
        results = [_run_replicate(t) for t in tasks]
    rows = sorted((row for res in results for row in res), key=lambda t: (t[0], t[1], t[3]))
    label, alpha = spec.class_label, spec.alpha
    raw = [[spec.kind, label, spec.d, _fmt(alpha), n, r, seed, m, _fmt(v)] for n, r, seed, m, v in rows]
    metric = PRIMARY_METRIC[spec.kind]
    aggregate, stats, ses = [], [], []
    for n in spec.n_grid:
        vals = np.array([v for nn, _, _, m, v in rows if nn == n and m == metric])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        aggregate.append([spec.kind, label, spec.d, _fmt(alpha), n, _fmt(mean), _fmt(se)])
        if spec.kind == "classification":
            stats.append(float(np.median(vals)))
            ses.append(1.2533 * se)
        else:
            stats.append(mean)
            ses.append(se)
    result = ExperimentResult(spec, raw, aggregate, statistic="median" if spec.kind == "classification" else "mean")
    theory = theory_prediction(spec)
    if theory is not None and len(spec.n_grid) >= 2 and all(s > 0 for s in stats):
        result.fit = fit_rate(spec.n_grid, stats, ses)
        result.theory = theory
    if spec.kind == "multiplier_check":
        result.extra["violations"] = int(sum(v for _, _, _, m, v in rows if m == "violation"))
    if spec.kind == "entropy":
        result.extra["alpha_hat"] = float(np.mean([v for *_, m, v in rows if m == "alpha_hat"]))
    if spec.kind == "isotonic":
        result.extra["max_certificate_slack"] = float(max(v for *_, m, v in rows if m == "certificate_slack"))
    return result
