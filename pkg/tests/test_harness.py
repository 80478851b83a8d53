import json
import math

import numpy as np
import pytest

from seterm.harness import (AGGREGATE_FIELDS, RAW_FIELDS, ExperimentSpec, SpecError, fit_rate,
                            generate_classification_data, generate_edge_data, generate_image_data,
                            generate_isotonic_data, replications_for, run_experiment, theory_prediction,
                            truth_set)
from seterm.sets import Staircase, symmetric_difference_risk
from seterm.theory import risk_rate, sup_rate_prediction


def test_image_generator():
    spec = ExperimentSpec("image", noise_sd=0.0)
    s = generate_image_data(spec, 200, 0)
    assert set(np.unique(s.responses)) <= {0.0, 1.0}
    np.testing.assert_array_equal(s.responses, generate_image_data(spec, 200, 0).responses)
    assert not np.array_equal(s.responses, generate_image_data(spec, 200, 1).responses)
    noisy = generate_image_data(ExperimentSpec("image"), 100_000, 0)
    resid = noisy.responses - truth_set(ExperimentSpec("image")).contains(noisy.cloud.points)
    assert abs(resid.mean()) <= 3 * resid.std() / math.sqrt(resid.size)


def test_edge_generator():
    s = generate_edge_data(ExperimentSpec("edge", a=0.5), 500, 0)
    f = 2.0 * truth_set(ExperimentSpec("edge")).contains(s.cloud.points) - 1.0
    np.testing.assert_array_equal(s.responses, f)
    spec = ExperimentSpec("edge", d=3, a=0.25)
    s = generate_edge_data(spec, 100_000, 3)
    f = 2.0 * truth_set(spec).contains(s.cloud.points) - 1.0
    xi = s.responses - 2 * spec.a * f
    for region in (f > 0, f < 0):
        part = xi[region]
        assert abs(part.mean()) <= 3 * part.std() / math.sqrt(part.size)
    np.testing.assert_array_equal(s.responses, generate_edge_data(spec, 100_000, 3).responses)


def test_classification_generator():
    s = generate_classification_data(ExperimentSpec("classification", b=0.5), 400, 0)
    inside = truth_set(ExperimentSpec("classification")).contains(s.cloud.points)
    np.testing.assert_array_equal(s.responses, inside.astype(float))
    spec = ExperimentSpec("classification", b=0.2)
    s = generate_classification_data(spec, 100_000, 1)
    inside = truth_set(spec).contains(s.cloud.points)
    p = s.responses[inside].mean()
    assert abs(p - 0.7) <= 3 * math.sqrt(0.7 * 0.3 / inside.sum())


def test_margin_identity_on_grid():
    b = 0.2
    truth = truth_set(ExperimentSpec("classification", b=b))
    g = Staircase(2, [[0.3, 0.9], [0.7, 0.5], [0.95, 0.1]])
    m = 1000
    t = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.c_[X.ravel(), Y.ravel()]
    eta = 0.5 + b * (2.0 * truth.contains(pts) - 1.0)

    def risk(ind):
        return np.mean(eta * (1 - ind) + (1 - eta) * ind)

    excess = risk(g.contains(pts).astype(float)) - risk(truth.contains(pts).astype(float))
    assert excess == pytest.approx(2 * b * symmetric_difference_risk(g, truth).value, abs=2e-3)


def test_isotonic_generator():
    spec = ExperimentSpec("isotonic", noise_sd=0.0)
    poset, y = generate_isotonic_data(spec, 300, 0)
    assert np.all(np.abs(y) <= 1.0) and poset.n_points == 300
    np.testing.assert_array_equal(y, generate_isotonic_data(spec, 300, 0)[1])


def test_spec_validation():
    with pytest.raises(SpecError):
        ExperimentSpec("image", set_class="convex2d", d=3)
    with pytest.raises(SpecError):
        ExperimentSpec("nonsense")
    with pytest.raises(SpecError):
        ExperimentSpec("image", replications=5)
    with pytest.raises(SpecError):
        ExperimentSpec("image", n_grid=(64, 32))
    with pytest.raises(SpecError):
        ExperimentSpec.from_mapping({"kind": "image", "bogus": 1})
    with pytest.raises(SpecError):
        ExperimentSpec.from_mapping({"kind": "image", "d": "two"})
    spec = ExperimentSpec.from_mapping({"kind": "ep_sup", "class": "upper", "d": "3", "n_grid": "16, 32",
                                        "replications": "4"})
    assert spec.set_class == "upper" and spec.n_grid == (16, 32) and spec.replications == 4


def test_replication_schedule():
    spec = ExperimentSpec("image", n_grid=(64, 128, 256, 512), replications=60)
    assert [replications_for(spec, n) for n in spec.n_grid] == [60, 30, 30, 30]


def test_theory_overlay_matches_theory_module():
    assert theory_prediction(ExperimentSpec("image", set_class="convex2d")).exponent == \
        risk_rate("image", {"alpha": 0.5}).exponent
    assert theory_prediction(ExperimentSpec("isotonic", d=3)).exponent == risk_rate("isotonic", {"d": 3}).exponent
    assert theory_prediction(ExperimentSpec("ep_sup", d=3, replications=30)).exponent == \
        sup_rate_prediction(2.0).exponent
    assert theory_prediction(ExperimentSpec("entropy")) is None


def test_fit_rate_exact_power_law():
    n = np.array([64, 128, 256, 512, 1024])
    fit = fit_rate(n, 3.0 * n ** (-2 / 3), 0.01 * n ** (-2 / 3))
    assert abs(fit.slope + 2 / 3) <= 1e-10
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-10)
    const = fit_rate(n, np.full(5, 0.4), np.full(5, 0.01))
    assert abs(const.slope) <= 1e-12


def test_fit_rate_coverage():
    r = np.random.default_rng(97)
    n = 2.0 ** np.arange(6, 12)
    truth = -0.5
    hits = 0
    for _ in range(100):
        mu = 2.0 * n ** truth
        se = 0.03 * mu
        fit = fit_rate(n, mu + se * r.standard_normal(n.size), se)
        hits += abs(fit.slope - truth) <= 2 * fit.slope_se
    assert hits >= 93


def test_fit_rate_errors():
    with pytest.raises(ValueError):
        fit_rate([10], [1.0], [0.1])
    with pytest.raises(ValueError):
        fit_rate([10, 20], [1.0, -1.0], [0.1, 0.1])


SMOKE = ExperimentSpec("image", set_class="lower", d=2, n_grid=(32, 64), replications=30, seed=11)


def test_smoke_run_and_determinism(tmp_path):
    a = run_experiment(SMOKE)
    assert math.isfinite(a.fit.slope)
    b = run_experiment(SMOKE)
    assert a.raw_csv() == b.raw_csv() and a.aggregate_csv() == b.aggregate_csv()
    header = a.raw_csv().splitlines()[0]
    assert header == ",".join(RAW_FIELDS)
    assert a.aggregate_csv().splitlines()[0] == ",".join(AGGREGATE_FIELDS)
    files = a.write(tmp_path / "out")
    names = {p.name for p in files}
    assert {"raw.csv", "aggregate.csv", "summary.json"} <= names
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["theory"]["exponent"] == risk_rate("image", {"alpha": 1.0}).exponent


def test_rows_sorted_and_parallel_identical():
    spec = ExperimentSpec("ep_sup", set_class="lower", d=2, n_grid=(16, 32), replications=4, seed=3)
    serial = run_experiment(spec)
    parallel = run_experiment(spec, threads=2)
    assert serial.raw_csv() == parallel.raw_csv()
    keys = [(int(r.split(",")[4]), int(r.split(",")[5])) for r in serial.raw_csv().splitlines()[1:]]
    assert keys == sorted(keys)


@pytest.mark.parametrize("kind,extra", [("edge", {"d": 3}), ("classification", {}), ("isotonic", {}),
                                        ("image", {"set_class": "convex2d"}), ("image", {"set_class": "upper"}),
                                        ("image", {"d": 4, "risk_mode": "monte_carlo"})])
def test_every_kind_runs(kind, extra):
    spec = ExperimentSpec(kind, n_grid=(16, 32), replications=30, seed=1, **extra)
    res = run_experiment(spec)
    assert math.isfinite(res.fit.slope)
    assert res.aggregate_csv().count("\n") == 3


def test_json_output(tmp_path):
    res = run_experiment(ExperimentSpec("ep_sup", n_grid=(8, 16), replications=3))
    res.write(tmp_path, fmt="json")
    raw = json.loads((tmp_path / "raw.json").read_text())
    assert set(raw[0]) == set(RAW_FIELDS)
