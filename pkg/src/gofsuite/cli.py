"""Command-line front end: run a test, run studies, run the demo.

Owns all file formats: raw data files (one number per line), histogram
files (``edges,counts`` header), JSON study specs, and the emitted report
and CSV outputs.  Every emitted file re-parses through the readers in this
module and in ``studies``.

Exit codes: 0 success, 2 unreadable data file, 3 estimation failure,
4 invalid configuration or malformed spec.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adjust import Histogram, TestReport, run_test
from .models import EstimationError, GofError, make_null_model
from .stats import METHOD_ORDER
from .studies import (
    PowerCase,
    StudySpec,
    Type1Case,
    anova_demo,
    plot_power_curves,
    power_study,
    summarize,
    type1_study,
)

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_ESTIMATION = 3
EXIT_CONFIG = 4

_CANONICAL = {m.lower(): m for m in METHOD_ORDER}


@dataclass
class RunConfig:
    """Everything a subcommand needs; fully determines the run given the seed."""

    subcommand: str
    data_path: Optional[str] = None
    spec_path: Optional[str] = None
    family: Optional[str] = None
    params: tuple[float, ...] = ()
    estimate: bool = False
    methods: Optional[tuple[str, ...]] = None
    B: int = 1000
    seed: Optional[int] = None
    alphas: Optional[tuple[float, ...]] = None
    poisson_lambda: Optional[float] = None
    nbins: Optional[int] = None
    threads: int = 0
    out: Optional[str] = None
    out_format: str = "json"
    plots: bool = False
    fresh_minp_batch: bool = False
    obs: int = 100
    groups: int = 5
    reps: int = 1000


def _parse_methods(text: str) -> tuple[str, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() not in _CANONICAL:
            raise GofError(f"unknown method {tok!r}")
        out.append(_CANONICAL[tok.lower()])
    return tuple(out)


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as e:
        raise GofError(f"bad numeric list {text!r}") from e


def _workers(threads: int) -> int:
    return threads if threads > 0 else (os.cpu_count() or 1)


# --------------------------------------------------------------------------
# Data files
# --------------------------------------------------------------------------


def read_data_file(path):
    """Raw sample (one value per line) or histogram (``edges,counts`` header).

    Histogram rows carry one edge and one count each; the final row holds
    the trailing upper edge with an empty count field.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty data file")
    if lines[0].lower().replace(" ", "") == "edges,counts":
        edges, counts = [], []
        for ln in lines[1:]:
            parts = [p.strip() for p in ln.split(",")]
            edges.append(float(parts[0]))
            if len(parts) > 1 and parts[1] != "":
                counts.append(float(parts[1]))
        if len(edges) != len(counts) + 1:
            raise ValueError("histogram file needs a trailing upper edge")
        return Histogram(np.array(edges), np.array(counts))
    return np.array([float(ln) for ln in lines])


def write_histogram_file(path, hist: Histogram):
    with open(path, "w") as fh:
        fh.write("edges,counts\n")
        for e, c in zip(hist.edges[:-1], hist.counts):
            fh.write(f"{e:.12g},{c:g}\n")
        fh.write(f"{hist.edges[-1]:.12g},\n")


# --------------------------------------------------------------------------
# Report files
# --------------------------------------------------------------------------


def write_report(path, report: TestReport, fmt: str = "json"):
    d = report.to_dict()
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    if fmt != "csv":
        raise GofError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write("key,value\n")
        fh.write(f"rc,{d['rc']!r}\n")
        for m, p in d["pvalues"].items():
            fh.write(f"pvalues.{m},{p!r}\n")
        for key in ("B", "seed", "n", "lambda", "nbins"):
            v = d[key]
            fh.write(f"{key},{'' if v is None else v}\n")
        fh.write(f"model.family,{d['model']['family']}\n")
        fh.write(f"model.params,{';'.join(repr(v) for v in d['model']['params'])}\n")
        fh.write(f"model.estimate,{int(d['model']['estimate'])}\n")
        fh.write(f"methods,{';'.join(d['methods'])}\n")
        fh.write(f"fresh_minp_batch,{int(d['fresh_minp_batch'])}\n")


def read_report(path) -> TestReport:
    """Re-parse a report written by ``write_report`` (either format)."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return TestReport.from_dict(json.loads(text))
    rows = {}
    for ln in text.splitlines()[1:]:
        if not ln.strip():
            continue
        key, _, value = ln.partition(",")
        rows[key] = value
    d = {
        "rc": float(rows["rc"]),
        "pvalues": {k.split(".", 1)[1]: float(v) for k, v in rows.items()
                    if k.startswith("pvalues.")},
        "B": int(rows["B"]),
        "seed": int(rows["seed"]),
        "n": int(rows["n"]),
        "lambda": float(rows["lambda"]) if rows["lambda"] else None,
        "nbins": int(rows["nbins"]) if rows["nbins"] else None,
        "model": {
            "family": rows["model.family"],
            "params": [float(v) for v in rows["model.params"].split(";")],
            "estimate": bool(int(rows["model.estimate"])),
        },
        "methods": rows["methods"].split(";"),
        "fresh_minp_batch": bool(int(rows["fresh_minp_batch"])),
    }
    return TestReport.from_dict(d)


# --------------------------------------------------------------------------
# Study spec files (JSON)
# --------------------------------------------------------------------------


def _load_json_spec(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise GofError(f"{path}: line {e.lineno}: {e.msg}") from e


def load_type1_spec(path):
    raw = _load_json_spec(path)
    try:
        cases = [Type1Case(c["family"], tuple(c["params"]),
                           bool(c.get("estimate", False)), int(c["n"]))
                 for c in raw["cases"]]
        return {
            "cases": cases,
            "B": int(raw.get("B", 1000)),
            "reps": int(raw.get("reps", 1000)),
            "alphas": tuple(raw.get("alphas", (0.01, 0.05, 0.10))),
            "methods": tuple(raw["methods"]) if "methods" in raw else None,
            "seed": int(raw.get("seed", 0)),
        }
    except (KeyError, TypeError, ValueError) as e:
        raise GofError(f"{path}: bad type1 spec: {e}") from e


def load_power_spec(path) -> dict:
    raw = _load_json_spec(path)
    try:
        cases = []
        for c in raw["cases"]:
            cases.append(PowerCase(
                name=str(c["name"]),
                null_family=c["null"]["family"],
                null_params=tuple(c["null"]["params"]),
                estimate=bool(c["null"].get("estimate", False)),
                alt_family=c["alternative"]["family"],
                alt_params=tuple(c["alternative"]["params"]),
                grid=tuple(c["grid"]),
                n=int(c.get("n", 1000)),
                binned=None if c.get("binned") is None else int(c["binned"]),
                poisson_lambda=(None if c.get("poisson_lambda") is None
                                else float(c["poisson_lambda"])),
            ))
        return {
            "cases": tuple(cases),
            "B": int(raw.get("B", 1000)),
            "reps": int(raw.get("reps", 1000)),
            "alphas": tuple(raw.get("alphas", (0.05,))),
            "methods": tuple(raw["methods"]) if "methods" in raw else None,
            "seed": int(raw.get("seed", 0)),
        }
    except (KeyError, TypeError, ValueError) as e:
        raise GofError(f"{path}: bad power spec: {e}") from e


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_test(cfg: RunConfig) -> int:
    try:
        model = make_null_model(cfg.family, cfg.params, cfg.estimate)
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sample = read_data_file(cfg.data_path)
    except OSError as e:
        print(f"error: cannot read {cfg.data_path}: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except (ValueError, GofError) as e:
        print(f"error: bad data file {cfg.data_path}: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    try:
        report = run_test(sample, model, methods=cfg.methods, B=cfg.B,
                          poisson_lambda=cfg.poisson_lambda, seed=cfg.seed,
                          workers=_workers(cfg.threads), nbins=cfg.nbins,
                          fresh_minp_batch=cfg.fresh_minp_batch)
    except EstimationError as e:
        print(f"error: estimation failed: {e}", file=sys.stderr)
        return EXIT_ESTIMATION
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.seed is None:
        print(f"seed: {report.seed}")
    print(f"RC: {report.rc_pvalue:.4f}")
    for m in report.methods:
        print(f"{m}: {report.per_method_pvalues[m]:.4f}")
    if cfg.out:
        write_report(cfg.out, report, cfg.out_format)
    return EXIT_OK


def _out_dir(cfg: RunConfig):
    import pathlib

    d = pathlib.Path(cfg.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_type1(cfg: RunConfig) -> int:
    try:
        spec = load_type1_spec(cfg.spec_path)
        if cfg.seed is not None:
            spec["seed"] = cfg.seed
        if cfg.alphas:
            spec["alphas"] = cfg.alphas
        methods = spec.pop("methods")
        result = type1_study(**spec,
                             **({} if methods is None else {"methods": methods}),
                             workers=_workers(cfg.threads))
    except OSError as e:
        print(f"error: cannot read spec: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    path = _out_dir(cfg) / "type1.csv"
    result.write_csv(path)
    print(f"wrote {path}")
    for case, rates in zip(result.cases, result.rates):
        cells = "  ".join(f"{a:g}:{r * 100:.1f}%" for a, r in
                          zip(result.alphas, rates))
        kind = "Estimated" if case.estimate else "Fixed"
        print(f"{case.family:<12} {kind:<10} n={case.n:<5} {cells}")
    return EXIT_OK


def cmd_power(cfg: RunConfig) -> int:
    try:
        raw = load_power_spec(cfg.spec_path)
        if cfg.seed is not None:
            raw["seed"] = cfg.seed
        if cfg.alphas:
            raw["alphas"] = cfg.alphas
        methods = raw.pop("methods")
        spec = StudySpec(**raw,
                         **({} if methods is None else {"methods": methods}),
                         workers=_workers(cfg.threads))
        result = power_study(spec)
    except OSError as e:
        print(f"error: cannot read spec: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(cfg)
    result.write_csv(out / "power.csv")
    print(f"wrote {out / 'power.csv'}")
    if len(result.cases) >= 2:
        summary = summarize(result)
        summary.write_csv(out / "summary.csv")
        print(f"wrote {out / 'summary.csv'}")
        ranked = sorted(summary.mean_power, key=summary.mean_power.get,
                        reverse=True)
        for m in ranked:
            print(f"{m:<10} mean power {summary.mean_power[m] * 100:.1f}%")
    if cfg.plots:
        for p in plot_power_curves(result, out):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_demo(cfg: RunConfig) -> int:
    try:
        result = anova_demo(n_obs=cfg.obs, n_groups=cfg.groups, reps=cfg.reps,
                            seed=0 if cfg.seed is None else cfg.seed)
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(cfg)
    minima_path = out / "demo_minima.csv"
    curve_path = out / "demo_curve.csv"
    result.write_csv(minima_path, curve_path)
    print(f"wrote {minima_path}")
    print(f"wrote {curve_path}")
    print(f"raw min-p mean: {result.raw_minima.mean():.4f}")
    u = np.sort(result.adjusted)
    i = np.arange(1, len(u) + 1)
    ksd = max(np.max(i / len(u) - u), np.max(u - (i - 1) / len(u)))
    print(f"adjusted KS distance to uniform: {ksd:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gofsuite",
        description="Simultaneous goodness-of-fit testing with a "
                    "simulation-calibrated combined p-value.",
    )
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=0,
                       help="worker processes (0 = all cores)")
        p.add_argument("--out", default=None, help="output path or directory")

    t = sub.add_parser("test", help="test one data file against a null model")
    t.add_argument("--data", required=True, help="data file (raw or histogram)")
    t.add_argument("--null", required=True, help="null family name")
    t.add_argument("--params", required=True, help="comma-separated parameters")
    t.add_argument("--estimate", action="store_true",
                   help="re-fit parameters from the data")
    t.add_argument("--methods", default=None,
                   help="comma-separated method names (default: all applicable)")
    t.add_argument("--B", type=int, default=1000, help="bootstrap replicates")
    t.add_argument("--lambda", dest="poisson_lambda", type=float, default=None,
                   help="treat the sample size as Poisson with this rate")
    t.add_argument("--nbins", type=int, default=None,
                   help="bin count for the EqualSize/EqualProb chi-square")
    t.add_argument("--format", choices=("json", "csv"), default="json")
    t.add_argument("--fresh-minp-batch", action="store_true",
                   help="simulate a second batch for the min-p sample")
    common(t)

    for name, helptext in (("type1", "type-I-error grid from a JSON spec"),
                           ("power", "power study from a JSON spec")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--spec", required=True, help="JSON study spec")
        p.add_argument("--alpha", default=None,
                       help="comma-separated alpha levels (overrides spec)")
        if name == "power":
            p.add_argument("--plots", action="store_true",
                           help="write one SVG power curve per case")
        common(p)

    d = sub.add_parser("demo", help="pairwise-comparison adjustment demo")
    d.add_argument("--obs", type=int, default=100)
    d.add_argument("--groups", type=int, default=5)
    d.add_argument("--reps", type=int, default=1000)
    common(d)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=args.subcommand)
    cfg.seed = args.seed
    cfg.threads = args.threads
    cfg.out = args.out
    if args.subcommand == "test":
        cfg.data_path = args.data
        cfg.family = args.null
        cfg.params = _parse_floats(args.params)
        cfg.estimate = args.estimate
        cfg.methods = None if args.methods is None else _parse_methods(args.methods)
        cfg.B = args.B
        cfg.poisson_lambda = args.poisson_lambda
        cfg.nbins = args.nbins
        cfg.out_format = args.format
        cfg.fresh_minp_batch = args.fresh_minp_batch
    elif args.subcommand in ("type1", "power"):
        cfg.spec_path = args.spec
        cfg.alphas = None if args.alpha is None else _parse_floats(args.alpha)
        cfg.plots = getattr(args, "plots", False)
    else:
        cfg.obs = args.obs
        cfg.groups = args.groups
        cfg.reps = args.reps
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except GofError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"test": cmd_test, "type1": cmd_type1,
               "power": cmd_power, "demo": cmd_demo}[cfg.subcommand]
    return handler(cfg)


if __name__ == "__main__":
    sys.exit(main())
