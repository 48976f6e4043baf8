"""Command-line front end: ``treeclust {fit,simulate,bootstrap}``.

Exit codes: 0 ok, 2 input/usage error, 3 full model unfit,
4 simulation failure quota exceeded, 5 bootstrap failure quota exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .data import read_dataset, write_table
from .errors import FullModelUnfit, InputError, TooManyFailures
from .glm import DEFAULT_RIDGE, Family
from .inference import bootstrap_ci
from .metrics import summarize_cell
from .simulate import InterceptDist, Scenario, parse_key_values
from .study import default_methods, run_cell
from .tsc import ModelSpec, fit_tsc

log = logging.getLogger("treeclust")

EXIT_OK, EXIT_INPUT, EXIT_UNFIT, EXIT_SIM, EXIT_BOOT = 0, 2, 3, 4, 5

# Flag dest -> config-file key.
_CONFIG_KEYS = {
    "family": "family", "alpha": "alpha", "max_splits": "max_splits", "ridge": "ridge",
    "reps": "reps", "bootstrap": "bootstrap", "level": "level", "seed": "seed",
    "threads": "threads", "out": "out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _cell(text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("expected n,n_i,m0,rho,dist")
    try:
        n, n_i, m0 = (int(p) for p in parts[:3])
        rho = float(parts[3])
        dist = InterceptDist(parts[4].lower())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad cell {text!r}: {exc}") from None
    return n, n_i, m0, rho, dist


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value file; flags override it")
    common.add_argument("--family", choices=[f.value for f in Family])
    common.add_argument("--alpha", type=float)
    common.add_argument("--max-splits", type=int, dest="max_splits")
    common.add_argument("--ridge", type=float, help=f"ridge for ordering and fallback fits (default {DEFAULT_RIDGE})")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker processes for replications")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="treeclust", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="fit a tree-structured clustering to a CSV")
    p.add_argument("input", type=Path)

    p = sub.add_parser("simulate", parents=[common], help="run simulation cells")
    p.add_argument("--cell", type=_cell, action="append", required=True,
                   help="n,n_i,m0,rho,dist (dist: normal|chisq); repeatable")
    p.add_argument("--reps", type=int)
    p.add_argument("--include-small-binary", action="store_true",
                   help="allow binary cells with n_i < 8")

    p = sub.add_parser("bootstrap", parents=[common], help="bootstrap confidence intervals")
    p.add_argument("input", type=Path)
    p.add_argument("--bootstrap", type=int, metavar="B")
    p.add_argument("--level", type=float)
    return parser


def _resolve(args, parser) -> argparse.Namespace:
    cfg = {}
    if args.config is not None:
        try:
            cfg = parse_key_values(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
    defaults = dict(family="gaussian", alpha=0.05, max_splits=None, ridge=DEFAULT_RIDGE,
                    reps=100, bootstrap=200, level=0.95, seed=0, threads=1, out=Path("."))
    casts = dict(alpha=float, ridge=float, level=float, max_splits=int, reps=int,
                 bootstrap=int, seed=int, threads=int, out=Path, family=str)
    unknown = set(cfg) - set(_CONFIG_KEYS.values())
    if unknown:
        parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
    for dest, key in _CONFIG_KEYS.items():
        if not hasattr(args, dest) or getattr(args, dest) is not None:
            continue
        if key in cfg:
            try:
                setattr(args, dest, casts[dest](cfg[key]))
            except ValueError:
                parser.error(f"config value {key}={cfg[key]!r} is invalid")
        else:
            setattr(args, dest, defaults[dest])
    if args.family not in {f.value for f in Family}:
        parser.error(f"unknown family {args.family!r}")
    if not 0.0 < args.alpha < 1.0:
        parser.error("--alpha must lie in (0, 1)")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    if getattr(args, "reps", 1) < 1:
        parser.error("--reps must be at least 1")
    if getattr(args, "bootstrap", 2) < 2:
        parser.error("--bootstrap B must be at least 2")
    if hasattr(args, "level") and not 0.0 < args.level < 1.0:
        parser.error("--level must lie in (0, 1)")
    return args


def _spec(args) -> ModelSpec:
    return ModelSpec(family=args.family, alpha=args.alpha, max_splits=args.max_splits,
                     ridge_ordering=args.ridge, ridge_fallback=args.ridge)


def cmd_fit(args) -> int:
    data = read_dataset(args.input, args.family)
    fit = fit_tsc(data, _spec(args))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    rows = [("shared", name, b, "") for name, b in zip(fit.covariate_names, fit.shared_beta)]
    rows += [("cluster", f"cluster{k + 1}", v, len(members))
             for k, (v, members) in enumerate(zip(fit.cluster_intercepts.values,
                                                  fit.partition.members()))]
    rows += [("step", f"step{r.step}", r.global_p, "accepted" if r.accepted else "rejected")
             for r in fit.records]
    write_table(out / "summary.csv", ["kind", "name", "value", "note"], rows)
    write_table(out / "partition.csv", ["unit", "cluster"],
                [(u, int(k) + 1) for u, k in zip(fit.unit_labels, fit.partition.cluster_of)])
    write_table(out / "path.csv", ["step", "unit", "intercept"],
                [(s, u, v) for s, row in enumerate(fit.path) for u, v in zip(fit.unit_labels, row)])
    log.info("%d clusters after %d accepted splits", fit.n_clusters, len(fit.accepted))
    return EXIT_OK


_METRICS = ("mse_intercepts", "mse_linear", "n_clusters")


def cmd_simulate(args) -> int:
    family = Family.parse(args.family)
    spec = _spec(args)
    raw_rows, summaries = [], []
    failed_total = attempted = 0
    for n, n_i, m0, rho, dist in args.cell:
        if family is Family.BINOMIAL and n_i < 8 and not args.include_small_binary:
            log.warning("skipping binary cell n=%d/n_i=%d (use --include-small-binary)", n, n_i)
            continue
        sc = Scenario.standard(n, n_i, m0, rho, dist, family, seed=args.seed)
        reps = run_cell(sc, args.reps, spec, default_methods(family), workers=args.threads)
        for rm in reps:
            raw_rows.append((n, n_i, m0, rho, dist.value, family.value, rm.replication, rm.method,
                             rm.mse_intercepts, rm.mse_linear, rm.n_clusters, int(rm.failed)))
        failed_total += sum(rm.failed for rm in reps)
        attempted += len(reps)
        summaries.append(((n, n_i, rho, dist.value), m0, summarize_cell(reps)))
    if not attempted:
        log.error("no cells to run")
        return EXIT_INPUT

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "raw_metrics.csv",
                ["n", "n_i", "m0", "rho", "dist", "family", "replication", "method",
                 *_METRICS, "failed"], raw_rows)
    m0s = sorted({m0 for _, m0, _ in summaries})
    settings = list(dict.fromkeys(key for key, _, _ in summaries))
    header = ["n", "n_i", "rho", "dist", "method"]
    header += [f"{m}_m0_{m0}" for m in _METRICS for m0 in m0s]
    header += [f"failed_m0_{m0}" for m0 in m0s]
    table = []
    for key in settings:
        cells = {m0: s for k, m0, s in summaries if k == key}
        for method in default_methods(family):
            row = [*key, method]
            for m in _METRICS:
                row += [getattr(cells[m0][method], m) if m0 in cells else "" for m0 in m0s]
            row += [cells[m0][method].n_failed if m0 in cells else "" for m0 in m0s]
            table.append(row)
    write_table(out / "cell_table.csv", header, table)
    if failed_total * 2 > attempted:
        log.error("%d of %d replications failed", failed_total, attempted)
        return EXIT_SIM
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    data = read_dataset(args.input, args.family)
    spec = _spec(args)
    res = bootstrap_ci(data, spec, args.bootstrap, args.level, args.seed, workers=args.threads)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "intervals.csv", ["parameter", "estimate", "lower", "upper"],
                [(name, est, *res.intervals[name]) for name, est in zip(res.names, res.estimates)])
    if res.n_failed:
        log.warning("%d of %d replicates failed and were dropped", res.n_failed, res.B)
    return EXIT_OK


_COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "bootstrap": cmd_bootstrap}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    args = _resolve(args, parser)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"treeclust: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FullModelUnfit as exc:
        print(f"treeclust: {exc}", file=sys.stderr)
        return EXIT_UNFIT
    except TooManyFailures as exc:
        print(f"treeclust: {exc}", file=sys.stderr)
        return EXIT_BOOT


if __name__ == "__main__":
    sys.exit(main())
