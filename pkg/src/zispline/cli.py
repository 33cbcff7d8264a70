"""Command line interface.

Subcommands:

* ``fit``       fit one model spec to a CSV dataset
* ``simulate``  run a replication study (study1 or study2)
* ``select``    fit a model grid, rank by AIC, pick the MRE winner
* ``surrogate`` emit a synthetic dataset for end-to-end smoke runs

Every run with a ``--seed`` is bit-deterministic in all output files. Exit
codes: 0 success, 1 usage/input error, 2 fit did not converge (the report is
still written, flagged).
"""

from __future__ import annotations

import argparse
import sys

from . import formats
from .estimation import fit as fit_model
from .selection import cv_mre, grid_run
from .simulation import (
    Study1Config,
    Study2Config,
    run_study,
    study1_families,
    study2_families,
    surrogate_dataset,
)

__all__ = ["main"]


def _fit_options(args) -> dict:
    return {
        "eps_frac": args.eps,
        "max_ebok_iter": args.max_ebok_iter,
        "tol_g": args.tol_g,
        "tol_f": args.tol_f,
        "max_iter": args.max_iter,
    }


def _add_common_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=1e-3,
                   help="minimal knot separation, as a fraction of the covariate range")
    p.add_argument("--max-ebok-iter", type=int, default=50,
                   help="cap on box adaptation rounds for variable knots")
    p.add_argument("--tol-g", type=float, default=1e-6, help="projected gradient tolerance")
    p.add_argument("--tol-f", type=float, default=1e-9, help="relative objective change tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="inner optimizer iteration cap")


def cmd_fit(args) -> int:
    data = formats.load_dataset(args.data, response=args.response)
    with open(args.spec, encoding="utf-8") as fh:
        spec = formats.parse_model_spec(fh.read(), data.columns)
    options = _fit_options(args)
    result = fit_model(spec, data, **options)

    cv = None
    if args.cv:
        res = cv_mre(spec, data, folds=args.folds, seed=args.seed, kind=args.mre_kind, **options)
        cv = {
            "folds": res.plan.k,
            "kind": res.kind,
            "mre": res.value,
            "n_clamped": res.n_clamped,
            "n_retried": res.n_retried,
            "valid": res.valid,
        }

    report = formats.fit_report(result, data.columns, seed=args.seed, options=options, cv=cv)
    formats.write_json(f"{args.out}.json", report)
    formats.write_curve_csv(f"{args.out}.curves.csv", formats.curve_samples(result, args.curve_points))

    print(f"family {spec.family}  n {result.n}  dim {result.dimension}")
    print(f"loglik {formats.fmt(result.loglik, 8)}  aic {formats.fmt(report['aic'], 8)}  "
          f"bic {formats.fmt(report['bic'], 8)}")
    if cv is not None:
        print(f"cv_mre({cv['kind']},{cv['folds']}) {formats.fmt(cv['mre'])}")
    for name, value in result.param_table():
        print(f"  {name:28s} {formats.fmt(value, 6)}")
    for name, knots in result.knots.items():
        print(f"  knots {name}: {' '.join(formats.fmt(k, 6) for k in knots)}")
    if not result.converged:
        print("warning: fit flagged as not converged", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args) -> int:
    options = _fit_options(args)
    if args.study == "study1":
        cfg = Study1Config(alpha=args.alpha, n=args.n, replications=args.reps, seed=args.seed)
        groups = [("cubic fixed-knot fits", study1_families())]
    else:
        lo, hi = args.knots
        cfg = Study2Config(n=args.n, replications=args.reps, knot_range=(lo, hi), seed=args.seed)
        groups = [
            (
                f"degree {d} {regime}-knot fits",
                study2_families((lo, hi), degrees=(d,), regimes=(regime,),
                                include_linear=(d == 1 and regime == "fixed")),
            )
            for d in (1, 3)
            for regime in ("fixed", "variable")
        ]

    payload = {"study": args.study, "seed": args.seed, "replications": args.reps, "tables": {}}
    for title, families in groups:
        report = run_study(
            cfg,
            families,
            compute_mre=not args.no_mre,
            folds=args.folds,
            mre_kind=args.mre_kind,
            **options,
        )
        table = formats.render_study_table(report, title=title)
        print(table)
        payload["tables"][title] = formats.study_report_dict(report)
    if args.out:
        formats.write_json(args.out, payload)
    return 0


def cmd_select(args) -> int:
    data = formats.load_dataset(args.data, response=args.response)
    with open(args.grid, encoding="utf-8") as fh:
        named = formats.parse_grid(fh.read(), data.columns)
    names = [n for n, _ in named]
    specs = [s for _, s in named]
    report = grid_run(
        specs,
        data,
        names=names,
        top_t=args.top,
        folds=args.folds,
        seed=args.seed,
        mre_kind=args.mre_kind,
        **_fit_options(args),
    )
    if not report.ranked:
        print("error: every model in the grid failed to fit", file=sys.stderr)
        return 1
    print(formats.render_grid_table(report))
    if report.winner is not None:
        print(f"winner by cv_mre among the top {report.top_t} AIC models: "
              f"{report.entries[report.winner].name}")
    if args.out:
        formats.write_json(args.out, formats.grid_report_dict(report, data.columns))
    return 0


def cmd_surrogate(args) -> int:
    data = surrogate_dataset(n=args.n, seed=args.seed)
    formats.write_dataset(args.out, data, response="count")
    print(f"wrote {data.n} rows to {args.out} "
          f"(zero fraction {formats.fmt((data.y == 0).mean())}, max count {int(data.y.max())})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zispline",
        description="Zero-inflated count regression with spline covariate effects",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model spec to CSV data")
    p_fit.add_argument("--data", required=True, help="CSV file; first column is the count response")
    p_fit.add_argument("--spec", required=True, help="model spec file")
    p_fit.add_argument("--response", default=None, help="response column name (default: first)")
    p_fit.add_argument("--out", required=True, help="output stem: writes <out>.json and <out>.curves.csv")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--cv", action="store_true", help="also cross-validate the spec")
    p_fit.add_argument("--folds", type=int, default=20)
    p_fit.add_argument("--mre-kind", choices=("abs", "sq"), default="abs")
    p_fit.add_argument("--curve-points", type=int, default=200)
    _add_common_fit_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a replication study")
    p_sim.add_argument("study", choices=("study1", "study2"))
    p_sim.add_argument("--alpha", type=float, default=3.0, help="oscillation strength (study1)")
    p_sim.add_argument("--n", type=int, default=200)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--knots", type=int, nargs=2, default=(1, 6), metavar=("LO", "HI"),
                       help="knot count range (study2)")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--folds", type=int, default=20)
    p_sim.add_argument("--mre-kind", choices=("abs", "sq"), default="abs")
    p_sim.add_argument("--no-mre", action="store_true", help="skip cross-validated MRE")
    p_sim.add_argument("--out", default=None, help="also write a JSON report here")
    _add_common_fit_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sel = sub.add_parser("select", help="fit a model grid and pick a winner")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--grid", required=True, help="grid file: spec keys with | separated axes")
    p_sel.add_argument("--response", default=None)
    p_sel.add_argument("--top", type=int, default=20, help="AIC preselection size for the MRE check")
    p_sel.add_argument("--folds", type=int, default=20)
    p_sel.add_argument("--mre-kind", choices=("abs", "sq"), default="abs")
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--out", default=None, help="also write a JSON report here")
    _add_common_fit_flags(p_sel)
    p_sel.set_defaults(func=cmd_select)

    p_sur = sub.add_parser("surrogate", help="emit a synthetic dataset")
    p_sur.add_argument("--n", type=int, default=768)
    p_sur.add_argument("--seed", type=int, default=0)
    p_sur.add_argument("--out", required=True)
    p_sur.set_defaults(func=cmd_surrogate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.reps is None:
        args.reps = 100 if args.study == "study1" else 50
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
