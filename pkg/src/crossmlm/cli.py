"""Command-line interface: simulate, structure, fit, compare.

Exit statuses: 0 success; 1 usage or ingestion error; 2 numerical
failure; 3 success with a convergence warning (some split-R-hat above
1.05).  All subcommands are deterministic given their inputs and seeds,
and every file written here round-trips through the package readers.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .data import DataError, analyze_structure, encode_classification, \
    read_table, write_table
from .design import DesignError, build_design
from .dyadic import DyadError
from .formula import FormulaError, parse_formula
from .oracle import OracleError, ml_fit, named_components
from .posterior import SummaryTable, VPCReport, summarize, vpc
from .sampler import PriorSpec, SamplerError, gibbs_fit, write_draws
from .simulate import SimError, read_design, simulate

RHAT_WARN = 1.05

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_CONVERGENCE = 3

_USAGE_ERRORS = (FormulaError, DataError, DesignError, DyadError, SimError,
                 OSError, ValueError)
_NUMERIC_ERRORS = (SamplerError, OracleError, np.linalg.LinAlgError,
                   FloatingPointError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="crossmlm",
                     description="Gaussian cross-classified multilevel models")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate data from a design document")
    sim.add_argument("--design", required=True, help="JSON design document")
    sim.add_argument("--seed", type=int, default=None,
                     help="override the design seed")
    sim.add_argument("--out", required=True, help="output CSV path")

    st = sub.add_parser("structure", help="diagnose classification structure")
    st.add_argument("--data", required=True)
    st.add_argument("--classes", required=True,
                    help="comma-separated label columns")

    fit = sub.add_parser("fit", help="fit a model by Gibbs sampling or ML")
    fit.add_argument("--data", required=True)
    fit.add_argument("--formula", required=True)
    fit.add_argument("--engine", choices=("gibbs", "ml"), default="gibbs")
    fit.add_argument("--iter", type=int, default=None, dest="iterations")
    fit.add_argument("--burnin", type=int, default=None)
    fit.add_argument("--thin", type=int, default=None)
    fit.add_argument("--chains", type=int, default=None)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--prior-a", type=float, default=None)
    fit.add_argument("--prior-b", type=float, default=None)
    fit.add_argument("--restarts", type=int, default=None)
    fit.add_argument("--tolerance", type=float, default=None)
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--format", choices=("table", "doc"), default="table")

    cmp = sub.add_parser("compare",
                         help="fit nested specifications side by side")
    cmp_ctl = cmp
    cmp_ctl.add_argument("--data", required=True)
    cmp_ctl.add_argument("--full", required=True)
    cmp_ctl.add_argument("--reduced", required=True)
    cmp_ctl.add_argument("--iter", type=int, default=5000, dest="iterations")
    cmp_ctl.add_argument("--burnin", type=int, default=500)
    cmp_ctl.add_argument("--thin", type=int, default=1)
    cmp_ctl.add_argument("--chains", type=int, default=2)
    cmp_ctl.add_argument("--seed", type=int, default=0)
    cmp_ctl.add_argument("--out", default=None, help="also write the report here")
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    sd = read_design(args.design)
    if args.seed is not None:
        sd = dataclasses.replace(sd, seed=args.seed)
    d = simulate(sd)
    write_table(d, args.out)
    print(f"wrote {d.n} rows to {args.out}")
    return EXIT_OK


def _cmd_structure(args) -> int:
    columns = [c.strip() for c in args.classes.split(",") if c.strip()]
    if not columns:
        raise _UsageError("--classes must name at least one column")
    d = read_table(args.data)
    maps = [encode_classification(d, c) for c in columns]
    report = analyze_structure(maps)
    for name, m in zip(report.names, maps):
        print(f"classification {name}: {m.J} clusters, {m.n} observations")
    for line in report.describe():
        print(line)
    return EXIT_OK


def _gibbs_control(args) -> dict:
    return {
        "iterations": 5000 if args.iterations is None else args.iterations,
        "burnin": 500 if args.burnin is None else args.burnin,
        "thin": 1 if args.thin is None else args.thin,
        "chains": 2 if args.chains is None else args.chains,
        "seed": 0 if args.seed is None else args.seed,
    }


def _summary_doc(table: SummaryTable, partition: VPCReport, ds, control,
                 floor_hits) -> dict:
    return {
        "parameters": table.to_doc()["parameters"],
        "vpc": partition.to_doc()["vpc"],
        "warnings": list(ds.warnings),
        "convergence_warning": table.convergence_warning(RHAT_WARN),
        "max_rhat": table.max_rhat(),
        "floor_hits": floor_hits,
        "control": control,
    }


def _render_fit_text(table: SummaryTable, partition: VPCReport, ds,
                     floor_hits) -> str:
    lines = [table.render(), "", "variance partition", partition.render()]
    for w in ds.warnings:
        lines.append(f"warning: {w}")
    if table.convergence_warning(RHAT_WARN):
        lines.append(f"warning: max split-Rhat {table.max_rhat():.3f} "
                     f"exceeds {RHAT_WARN}")
    if floor_hits:
        lines.append(f"note: variance floor hit {floor_hits} time(s)")
    return "\n".join(lines) + "\n"


def _cmd_fit(args) -> int:
    mcmc_flags = [args.iterations, args.burnin, args.thin, args.chains,
                  args.seed, args.prior_a, args.prior_b]
    ml_flags = [args.restarts, args.tolerance]
    if args.engine == "ml" and any(v is not None for v in mcmc_flags):
        raise _UsageError("engine=ml accepts no MCMC control or prior flags")
    if args.engine == "gibbs" and any(v is not None for v in ml_flags):
        raise _UsageError("--restarts/--tolerance apply to engine=ml only")

    formula = parse_formula(args.formula)
    d = read_table(args.data,
                   numeric=(formula.response, *formula.fixed_terms))
    ds = build_design(formula, d)
    y = d.numeric_column(formula.response)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if formula.is_pure_fixed:
        print("note: model has no random terms (pure fixed-effects fit)")

    if args.engine == "gibbs":
        control = _gibbs_control(args)
        prior = PriorSpec(a=0.001 if args.prior_a is None else args.prior_a,
                          b=0.001 if args.prior_b is None else args.prior_b)
        draws = gibbs_fit(ds, y, prior, **control)
        table = summarize(draws)
        partition = vpc(draws)
        write_draws(draws, out_dir / "draws.csv")
        if args.format == "doc":
            doc = _summary_doc(table, partition, ds, control, draws.floor_hits)
            (out_dir / "summary.json").write_text(
                json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        else:
            (out_dir / "summary.txt").write_text(
                _render_fit_text(table, partition, ds, draws.floor_hits),
                encoding="utf-8")
        print(f"wrote draws and summary to {out_dir}")
        for w in ds.warnings:
            print(f"warning: {w}")
        if table.convergence_warning(RHAT_WARN):
            print(f"warning: max split-Rhat {table.max_rhat():.3f} exceeds "
                  f"{RHAT_WARN}")
            return EXIT_CONVERGENCE
        return EXIT_OK

    res = ml_fit(ds, y,
                 restarts=3 if args.restarts is None else args.restarts,
                 tolerance=1e-8 if args.tolerance is None else args.tolerance)
    estimate = {
        "engine": "ml",
        "loglik": res.loglik,
        "beta": {name: float(b)
                 for name, b in zip(ds.fixed_names, res.beta)},
        "components": named_components(ds, res.theta),
        "n_evaluations": res.n_evaluations,
        "warnings": list(ds.warnings),
    }
    (out_dir / "estimate.json").write_text(
        json.dumps(estimate, indent=2) + "\n", encoding="utf-8")
    lines = [f"log-likelihood {res.loglik:.6f}"]
    lines += [f"beta[{name}] {float(b):.6f}"
              for name, b in zip(ds.fixed_names, res.beta)]
    lines += [f"{k} {v:.6f}" for k, v in estimate["components"].items()]
    lines += [f"warning: {w}" for w in ds.warnings]
    text = "\n".join(lines) + "\n"
    if args.format == "doc":
        (out_dir / "summary.json").write_text(
            json.dumps(estimate, indent=2) + "\n", encoding="utf-8")
    else:
        (out_dir / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def _variance_rows(table: SummaryTable):
    for r in table.rows:
        if r.name.startswith(("sigma2[", "cov[", "corr[")):
            yield r


def _cmd_compare(args) -> int:
    full = parse_formula(args.full)
    reduced = parse_formula(args.reduced)
    if not set(reduced.random_terms) <= set(full.random_terms):
        raise _UsageError(
            "reduced formula's random terms must be a subset of the full formula's")
    numeric = sorted({full.response, reduced.response,
                      *full.fixed_terms, *reduced.fixed_terms})
    d = read_table(args.data, numeric=numeric)

    results = {}
    for tag, formula in (("full", full), ("reduced", reduced)):
        ds = build_design(formula, d)
        y = d.numeric_column(formula.response)
        draws = gibbs_fit(ds, y, iterations=args.iterations,
                          burnin=args.burnin, thin=args.thin,
                          chains=args.chains, seed=args.seed)
        results[tag] = (summarize(draws), vpc(draws))

    lines = [f"full:    {args.full}", f"reduced: {args.reduced}", ""]
    head = (f"{'component':<24}{'full mean':>12}{'reduced':>12}"
            f"{'delta':>12}  note")
    lines += [head, "-" * len(head)]
    f_table, f_vpc = results["full"]
    r_table, r_vpc = results["reduced"]
    reduced_names = {r.name for r in _variance_rows(r_table)}
    changed = []
    for row in _variance_rows(f_table):
        if row.name in reduced_names:
            other = r_table.row(row.name)
            delta = other.mean - row.mean
            mcse = np.hypot(row.sd / np.sqrt(max(row.ess, 1.0)),
                            other.sd / np.sqrt(max(other.ess, 1.0)))
            flag = "changed" if abs(delta) > 2.0 * mcse else ""
            if flag:
                changed.append(row.name)
            lines.append(f"{row.name:<24}{row.mean:>12.5f}{other.mean:>12.5f}"
                         f"{delta:>+12.5f}  {flag}")
        else:
            lines.append(f"{row.name:<24}{row.mean:>12.5f}{'-':>12}"
                         f"{'-':>12}  dropped in reduced")
    lines += ["", "variance partition (full)", f_vpc.render(),
              "", "variance partition (reduced)", r_vpc.render()]
    if changed:
        lines += ["", "components with shifted estimates: " + ", ".join(changed)]
    report = "\n".join(lines) + "\n"
    print(report, end="")
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    warned = (f_table.convergence_warning(RHAT_WARN)
              or r_table.convergence_warning(RHAT_WARN))
    return EXIT_CONVERGENCE if warned else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "simulate": _cmd_simulate,
            "structure": _cmd_structure,
            "fit": _cmd_fit,
            "compare": _cmd_compare,
        }[args.command]
        return handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
