"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]`` / ``[FAIL]`` line (collected again in the
terminal summary). Rate criteria run the default experiment schedules;
the slowest take a few minutes on one core.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, CERTIFICATE_SLACKS
from oracles import isotonic_qp_oracle
from seterm.closure import WeightedInstance, brute_force_down_set, max_weight_down_set
from seterm.convex import brute_force_convex_subset, max_weight_convex_subset_2d
from seterm.ep_suprema import greedy_packing_entropy, localized_sup_lagrangian, multiplier_inequality_check
from seterm.harness import ExperimentSpec, run_experiment
from seterm.isotonic import isotonic_fit, pava_chain
from seterm.model_core import PointCloud, SetClassDescriptor, build_dominance_poset


def report(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def slope_check(label, spec, target, tol, threads=1):
    t0 = time.perf_counter()
    res = run_experiment(spec, threads=threads)
    dt = time.perf_counter() - t0
    slope = res.fit.slope
    report(label, abs(slope - target) <= tol,
           f"slope {slope:+.3f} (se {res.fit.slope_se:.3f}) vs {target:+.3f} +/- {tol} over n={list(spec.n_grid)}, "
           f"{dt:.0f}s")
    return res


def test_c01_closure_oracle_exact():
    r = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        n, d = int(r.integers(1, 17)), int(r.choice([2, 3]))
        poset = build_dominance_poset(PointCloud(r.random((n, d))))
        inst = WeightedInstance.from_points(poset, r.uniform(-1, 1, n))
        a, b = max_weight_down_set(inst), brute_force_down_set(inst)
        mismatches += a.objective_value != b.objective_value or not np.array_equal(a.nodes, b.nodes)
    dt = time.perf_counter() - t0
    report("C1 closure vs brute force", mismatches == 0 and dt < 60,
           f"{mismatches} mismatches / 500 instances in {dt:.1f}s")


def test_c02_convex_dp_exact():
    r = np.random.default_rng(2)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n = int(r.integers(1, 12))
        cloud = PointCloud(r.random((n, 2)))
        w = r.uniform(-1, 1, n)
        a = max_weight_convex_subset_2d(cloud, w).objective_value
        b = brute_force_convex_subset(cloud, w).objective_value
        mismatches += abs(a - b) > 1e-12
    dt = time.perf_counter() - t0
    report("C2 convex DP vs brute force", mismatches == 0 and dt < 120,
           f"{mismatches} mismatches / 200 instances in {dt:.1f}s")


def test_c03a_isotonic_equals_pava():
    r = np.random.default_rng(3)
    worst = 0.0
    for _ in range(500):
        n = int(r.integers(1, 51))
        t = np.sort(r.random(n))
        y = r.normal(size=n) + 2 * t
        fit = isotonic_fit(build_dominance_poset(PointCloud(np.c_[t, t])), y)
        worst = max(worst, float(np.abs(fit.fitted - pava_chain(y).fitted).max()))
    report("C3a isotonic vs PAVA", worst <= 1e-9, f"max deviation {worst:.2e} over 500 chains")


def test_c03b_isotonic_equals_qp_oracle():
    r = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        n, d = int(r.integers(1, 9)), int(r.choice([2, 3]))
        pts = r.random((n, d))
        y = r.normal(size=n)
        fit = isotonic_fit(build_dominance_poset(PointCloud(pts)), y)
        worst = max(worst, float(np.abs(fit.fitted - isotonic_qp_oracle(pts, y)).max()))
    report("C3b isotonic vs QP oracle", worst <= 1e-6, f"max deviation {worst:.2e} over 200 posets")


def test_c04_convex_image_rate():
    spec = ExperimentSpec("image", set_class="convex2d", d=2, n_grid=(64, 128, 256, 512))
    slope_check("C4 image LSE convex d=2", spec, -2 / 3, 0.12)


def test_c05_lower_image_rate():
    spec = ExperimentSpec("image", set_class="lower", d=3, n_grid=(256, 512, 1024, 2048, 4096))
    slope_check("C5 image LSE lower sets d=3", spec, -1 / 3, 0.10)


def test_c06_edge_rate():
    spec = ExperimentSpec("edge", set_class="lower", d=3, n_grid=(256, 512, 1024, 2048, 4096))
    slope_check("C6 edge LSE lower sets d=3", spec, -1 / 3, 0.12)


def test_c07_classification_rate():
    spec = ExperimentSpec("classification", set_class="lower", d=3, n_grid=(256, 512, 1024, 2048, 4096))
    slope_check("C7 classification ERM lower sets d=3 (median)", spec, -1 / 3, 0.12)


def test_c08a_sup_growth_lower_sets():
    spec = ExperimentSpec("ep_sup", set_class="lower", d=3, n_grid=tuple(2 ** k for k in range(8, 14)))
    slope_check("C8a sup growth lower sets d=3", spec, 1 / 6, 0.08)


def test_c08b_sup_growth_convex_contrast():
    spec = ExperimentSpec("ep_sup", set_class="convex2d", d=2, n_grid=(128, 256, 512, 1024), replications=240)
    slope_check("C8b sup growth convex d=2 (Donsker contrast)", spec, 0.0, 0.08)


def test_c09a_isotonic_rate_d2():
    spec = ExperimentSpec("isotonic", d=2, n_grid=(128, 256, 512, 1024, 2048))
    slope_check("C9a isotonic d=2", spec, -1 / 2, 0.12)


def test_c10_multiplier_inequalities():
    t0 = time.perf_counter()
    res = multiplier_inequality_check(SetClassDescriptor.lower(2), 2, "gaussian", [64, 256], 100, seed=10)
    dt = time.perf_counter() - t0
    report("C10 multiplier inequalities", res.violations == 0,
           f"{res.violations} violations / 100 configs, max slack {res.max_slack:+.3f}, {dt:.0f}s")


def _down_set_sums(pts, xi):
    n = pts.shape[0]
    masks = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)
    leq = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    ok = np.ones(masks.shape[0], bool)
    for i, j in zip(*np.nonzero(leq)):
        ok &= ~(masks[:, j] & ~masks[:, i])
    return masks[ok].sum(axis=1), masks[ok].astype(float) @ xi


def test_c11_lagrangian_envelope_exact():
    r = np.random.default_rng(11)
    mismatches = checked = 0
    for _ in range(200):
        n, d = int(r.integers(1, 15)), int(r.choice([2, 3]))
        pts = r.random((n, d))
        xi = r.normal(size=n)
        env = localized_sup_lagrangian(PointCloud(pts), SetClassDescriptor.lower(d), xi,
                                       np.linspace(0.0, np.abs(xi).max() + 0.1, 500))
        sizes, sums = _down_set_sums(pts, xi)
        for p in env:
            checked += 1
            mismatches += abs(p.value - sums[sizes <= p.size].max()) > 1e-9
    report("C11 Lagrangian envelope vs constrained brute force", mismatches == 0,
           f"{mismatches} mismatches at {checked} envelope sizes over 200 instances")


def test_c12_entropy_probe():
    rng = np.random.default_rng(12)
    cloud = PointCloud.uniform(1000, 2, rng)
    est = greedy_packing_entropy(SetClassDescriptor.lower(2), cloud, family_size=4000, seed=12)
    report("C12 entropy probe lower sets d=2", 0.75 <= est.alpha_hat <= 1.35,
           f"alpha_hat {est.alpha_hat:.3f} (raw {est.alpha_raw:.3f}) in [0.75, 1.35]")


def test_c13_determinism(tmp_path):
    specs = [ExperimentSpec("image", set_class="lower", d=2, n_grid=(32, 64), seed=13),
             ExperimentSpec("isotonic", d=2, n_grid=(32, 64), seed=13),
             ExperimentSpec("ep_sup", set_class="convex2d", d=2, n_grid=(16, 32), seed=13)]
    same = True
    for k, spec in enumerate(specs):
        a = run_experiment(spec).write(tmp_path / f"a{k}")
        b = run_experiment(spec, threads=2).write(tmp_path / f"b{k}")
        same &= all(pa.read_bytes() == pb.read_bytes() for pa, pb in zip(sorted(a), sorted(b)))
    report("C13 determinism", same, "byte-identical CSV/summary on rerun (serial vs 2 workers)")


def test_c09b_isotonic_rate_d3_optional():
    spec = ExperimentSpec("isotonic", d=3, n_grid=(128, 256, 512, 1024, 2048))
    slope_check("C9b isotonic d=3 (optional)", spec, -1 / 3, 0.12)


def test_c03c_certificates_in_full_run():
    worst = max(CERTIFICATE_SLACKS) if CERTIFICATE_SLACKS else math.nan
    report("C3c isotonic certificates", bool(CERTIFICATE_SLACKS) and worst <= 1e-8,
           f"max slack {worst:.2e} over {len(CERTIFICATE_SLACKS)} fits")
