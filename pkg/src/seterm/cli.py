"""Command-line interface.

Subcommands: ``solve``, ``simulate``, ``rates``, ``ep-sup``, ``entropy`` and
``check-multiplier``. Settings come from an optional ``--spec`` file
(``key = value`` lines or a JSON object); command-line flags override it.

Exit codes: 0 success, 2 invalid specification or input, 3 failed
numerical certificate.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .closure import SelectionKind, WeightedInstance, closure_network
from .ep_suprema import (append_sup_csv, estimate_sup_expectation, greedy_packing_entropy,
                         multiplier_inequality_check)
from .erm import (RegressionSample, classification_erm, edge_lse, image_lse, max_weight_set,
                  selection_to_json)
from .flow import to_dimacs
from .harness import (AGGREGATE_FIELDS, CertificateError, ExperimentSpec, SpecError, fit_rate,
                      run_experiment, theory_prediction)
from .isotonic import CERTIFICATE_TOL, isotonic_fit
from .model_core import PointCloud, SetClassDescriptor, SetClassKind, build_dominance_poset

logger = logging.getLogger("seterm")

EXIT_OK, EXIT_SPEC, EXIT_CERT = 0, 2, 3


def load_config(path: Optional[str]) -> dict:
    """Read a ``key = value`` or JSON configuration file."""
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"malformed JSON spec: {exc}") from None
        if not isinstance(data, dict):
            raise SpecError("JSON spec must be an object")
        return data
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _merge(cfg: dict, args: argparse.Namespace, keys) -> dict:
    out = dict(cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out["class" if k == "set_class" else k] = v
    if "set_class" in out:
        out["class"] = out.pop("set_class")
    return out


def _get(cfg: dict, key: str, cast, default=None):
    if key not in cfg or cfg[key] is None:
        if default is None:
            raise SpecError(f"missing setting {key!r}")
        return default
    try:
        return cast(cfg[key])
    except (TypeError, ValueError):
        raise SpecError(f"bad value for {key!r}: {cfg[key]!r}") from None


def _int_list(v):
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).replace(" ", "").split(",") if x]


def _descriptor(cfg: dict) -> SetClassDescriptor:
    try:
        return SetClassDescriptor(SetClassKind(_get(cfg, "class", str, "lower")), _get(cfg, "d", int, 2))
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_csv(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


# subcommands ---------------------------------------------------------------


def _read_xy(path: str):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and "".join(r).strip()]
    except OSError as exc:
        raise SpecError(f"cannot read input: {exc}") from None
    if not rows:
        raise SpecError("input file is empty")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise SpecError(f"non-numeric input: {exc}") from None
    if data.ndim != 2 or data.shape[1] < 2:
        raise SpecError("input needs coordinate columns followed by one response column")
    try:
        return PointCloud(data[:, :-1]), data[:, -1]
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def cmd_solve(args, cfg) -> int:
    cfg = _merge(cfg, args, ["input", "set_class", "model", "dimacs", "out", "format"])
    cloud, y = _read_xy(_get(cfg, "input", str))
    model = _get(cfg, "model", str, "image")
    fmt = _get(cfg, "format", str, "json")
    out = cfg.get("out")
    if model == "isotonic":
        poset = build_dominance_poset(cloud)
        fit = isotonic_fit(poset, y)
        if fmt == "csv":
            _emit(_rows_csv(["index", "fitted"], [[i, repr(float(v))] for i, v in enumerate(fit.fitted)]), out)
        else:
            doc = json.loads(fit.to_json())
            doc["fitted"] = fit.fitted.tolist()
            _emit(json.dumps(doc) + "\n", out)
        if not fit.certificate_slack <= CERTIFICATE_TOL:
            logger.error("certificate slack %.3g exceeds %.1g", fit.certificate_slack, CERTIFICATE_TOL)
            return EXIT_CERT
        return EXIT_OK
    cfg.setdefault("d", cloud.dim)
    desc = _descriptor({**cfg, "d": cloud.dim})
    try:
        if model == "weights":
            sel = max_weight_set(cloud, desc, y)
        else:
            sample = RegressionSample(cloud, y, model)
            sel = {"image": image_lse, "edge": edge_lse, "classification": classification_erm}[model](sample, desc)
    except (ValueError, KeyError) as exc:
        raise SpecError(str(exc)) from None
    if cfg.get("dimacs"):
        if desc.kind is SetClassKind.CONVEX2D:
            raise SpecError("DIMACS output exists only for lower/upper set classes")
        weights = y if model == "weights" else (y if model == "edge" else 2.0 * y - 1.0)
        poset = build_dominance_poset(cloud)
        kind = SelectionKind.DOWN if desc.kind is SetClassKind.LOWER else SelectionKind.UP
        Path(cfg["dimacs"]).write_text(to_dimacs(closure_network(WeightedInstance.from_points(poset, weights), kind)))
    if fmt == "csv":
        mask = sel.mask(cloud.n)
        _emit(_rows_csv(["index", "selected"], [[i, int(m)] for i, m in enumerate(mask)]), out)
    else:
        _emit(selection_to_json(sel, cloud) + "\n", out)
    return EXIT_OK


SIM_KEYS = ["kind", "set_class", "d", "n_grid", "replications", "noise_sd", "a", "b", "seed", "eval_points",
            "risk_mode", "law", "family_size"]


def cmd_simulate(args, cfg) -> int:
    cfg = _merge(cfg, args, SIM_KEYS + ["out"])
    out = cfg.pop("out", None) or "results"
    cfg.pop("threads", None)
    cfg.pop("format", None)
    spec = ExperimentSpec.from_mapping(cfg)
    threads = args.threads or 1
    result = run_experiment(spec, threads=threads)
    result.write(out, args.format or "csv")
    sys.stdout.write(json.dumps(result.summary(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_rates(args, cfg) -> int:
    cfg = _merge(cfg, args, ["input", "out", "format"])
    path = _get(cfg, "input", str)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise SpecError(f"cannot read aggregate file: {exc}") from None
    if not rows or set(AGGREGATE_FIELDS) - set(rows[0]):
        raise SpecError(f"aggregate file needs columns {AGGREGATE_FIELDS}")
    groups = OrderedDict()
    for r in rows:
        groups.setdefault((r["kind"], r["class"], r["d"], r["alpha"]), []).append(r)
    fits = []
    tables = []
    for (kind, klass, d, alpha), grp in groups.items():
        grp.sort(key=lambda r: int(r["n"]))
        n = [int(r["n"]) for r in grp]
        means = [float(r["mean"]) for r in grp]
        ses = [float(r["stderr"]) for r in grp]
        fit = fit_rate(n, means, ses)
        theory = None
        try:
            pseudo = ExperimentSpec(kind=kind, set_class="lower" if klass == "monotone" else klass, d=int(d),
                                    n_grid=tuple(n))
            theory = theory_prediction(pseudo)
        except SpecError:
            pass
        fits.append({"kind": kind, "class": klass, "d": int(d), "alpha": alpha, "slope": fit.slope,
                     "slope_se": fit.slope_se, "intercept": fit.intercept,
                     "theory_exponent": None if theory is None else theory.exponent})
        lines = [f"# {kind} {klass} d={d}", f"# slope {fit.slope!r} se {fit.slope_se!r}", "# n mean stderr fitted theory"]
        for nn, m, s in zip(n, means, ses):
            th = theory.evaluate(nn, n[0], means[0]) if theory is not None else float("nan")
            lines.append(f"{nn} {m!r} {s!r} {float(fit.predict(nn))!r} {th!r}")
        tables.append((f"rates_{kind}_{klass}_d{d}.dat", "\n".join(lines) + "\n"))
    fmt = cfg.get("format", "csv")
    if fmt == "json":
        text = json.dumps(fits, indent=1) + "\n"
    else:
        keys = ["kind", "class", "d", "alpha", "slope", "slope_se", "intercept", "theory_exponent"]
        text = _rows_csv(keys, [[f[k] if not isinstance(f[k], float) else repr(f[k]) for k in keys] for f in fits])
    out = cfg.get("out")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / f"rates.{fmt}").write_text(text)
        for name, table in tables:
            (Path(out) / name).write_text(table)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ep_sup(args, cfg) -> int:
    cfg = _merge(cfg, args, ["set_class", "d", "n_grid", "replications", "law", "seed", "out", "format"])
    desc = _descriptor(cfg)
    n_grid = _get(cfg, "n_grid", _int_list, [64, 128, 256])
    R = _get(cfg, "replications", int, 30)
    seed = _get(cfg, "seed", int, 0)
    law = _get(cfg, "law", str, "rademacher")
    if R < 2 or not n_grid:
        raise SpecError("need at least two replications and a nonempty n grid")
    try:
        ests = [estimate_sup_expectation(desc, n, R, law, seed) for n in n_grid]
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    out = cfg.get("out")
    if out:
        append_sup_csv(ests, out)
    rows = [e.row() for e in ests]
    if cfg.get("format") == "json":
        sys.stdout.write(json.dumps(rows) + "\n")
    else:
        keys = list(rows[0])
        sys.stdout.write(_rows_csv(keys, [[r[k] for k in keys] for r in rows]))
    return EXIT_OK


def cmd_entropy(args, cfg) -> int:
    cfg = _merge(cfg, args, ["set_class", "d", "n", "family_size", "seed", "out"])
    desc = _descriptor(cfg)
    n = _get(cfg, "n", int, 1000)
    seed = _get(cfg, "seed", int, 0)
    rng = np.random.default_rng(seed)
    cloud = PointCloud.uniform(n, desc.dim, rng)
    try:
        est = greedy_packing_entropy(desc, cloud, family_size=_get(cfg, "family_size", int, 4000), seed=seed)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    doc = {"class": desc.kind.value, "d": desc.dim, "n": n, "seed": seed, "eps": est.eps.tolist(),
           "counts": est.counts.tolist(), "alpha_hat": est.alpha_hat, "alpha_raw": est.alpha_raw}
    _emit(json.dumps(doc) + "\n", cfg.get("out"))
    return EXIT_OK


def cmd_check_multiplier(args, cfg) -> int:
    cfg = _merge(cfg, args, ["set_class", "d", "n_grid", "configs", "law", "seed", "out", "format"])
    desc = _descriptor(cfg)
    res = multiplier_inequality_check(desc, desc.dim, _get(cfg, "law", str, "gaussian"),
                                      _get(cfg, "n_grid", _int_list, [64, 256]),
                                      _get(cfg, "configs", int, 20), seed=_get(cfg, "seed", int, 0))
    if cfg.get("format") == "csv":
        keys = list(res.rows[0])
        text = _rows_csv(keys, [[repr(r[k]) if isinstance(r[k], float) else r[k] for k in keys] for r in res.rows])
    else:
        text = json.dumps({"violations": res.violations, "max_slack": res.max_slack, "rows": res.rows}) + "\n"
    _emit(text, cfg.get("out"))
    return EXIT_CERT if res.violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seterm", description="Set-structured ERM, isotonic regression and "
                                "empirical-process simulation tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="configuration file (key = value lines or JSON)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--threads", type=int, help="worker processes")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="fit one estimator on a CSV file")
    s.add_argument("--input", help="CSV with columns x1..xd and a response column")
    s.add_argument("--class", dest="set_class", choices=[k.value for k in SetClassKind])
    s.add_argument("--model", choices=("image", "edge", "classification", "weights", "isotonic"))
    s.add_argument("--dimacs", help="also write the flow network in DIMACS format")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", parents=[common], help="run an experiment spec")
    s.add_argument("--kind")
    s.add_argument("--class", dest="set_class")
    s.add_argument("--d", type=int)
    s.add_argument("--n-grid", dest="n_grid")
    s.add_argument("--replications", type=int)
    s.add_argument("--noise-sd", dest="noise_sd", type=float)
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--eval-points", dest="eval_points", type=int)
    s.add_argument("--risk-mode", dest="risk_mode")
    s.add_argument("--law")
    s.add_argument("--family-size", dest="family_size", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rates", parents=[common], help="fit growth rates from an aggregate CSV")
    s.add_argument("--input", help="aggregate CSV written by simulate")
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("ep-sup", parents=[common], help="estimate expected symmetrized suprema")
    s.add_argument("--class", dest="set_class")
    s.add_argument("--d", type=int)
    s.add_argument("--n-grid", dest="n_grid")
    s.add_argument("--replications", type=int)
    s.add_argument("--law", choices=("rademacher", "gaussian"))
    s.set_defaults(func=cmd_ep_sup)

    s = sub.add_parser("entropy", parents=[common], help="greedy packing entropy probe")
    s.add_argument("--class", dest="set_class")
    s.add_argument("--d", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--family-size", dest="family_size", type=int)
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("check-multiplier", parents=[common], help="check multiplier inequalities")
    s.add_argument("--class", dest="set_class")
    s.add_argument("--d", type=int)
    s.add_argument("--n-grid", dest="n_grid")
    s.add_argument("--configs", type=int)
    s.add_argument("--law", choices=("rademacher", "gaussian"))
    s.set_defaults(func=cmd_check_multiplier)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.spec)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise SpecError("seed must be an unsigned 64-bit integer")
        return args.func(args, cfg)
    except SpecError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return EXIT_SPEC
    except CertificateError as exc:
        sys.stderr.write(f"certificate failure: {exc}\n")
        return EXIT_CERT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
