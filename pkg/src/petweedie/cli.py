"""Command-line interface: ``petweedie <subcommand> [options]``.

Exit status is 0 on success, 1 on domain, numerical or I/O errors and 2 on
usage errors. Every stochastic subcommand takes ``--seed`` (default fixed).
"""
import argparse
import json
import os
import sys

import numpy as np

from . import estimating, indexes, pet, study
from . import io as pio
from .errors import PetweedieError
from .seeding import DEFAULT_SEED

THREADS_ENV = "PETWEEDIE_THREADS"


def _default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _pmf_method(args):
    return {"mc": "mc", "quad": "quad", "pgf": "pgf"}[args.method]


def _common(p, seed=True, method=False):
    if seed:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"master seed (default {DEFAULT_SEED})")
    if method:
        p.add_argument("--method", choices=("mc", "quad", "pgf"), default="quad",
                       help="pmf evaluator (default quad)")
        p.add_argument("--draws", type=int, default=int(pet.DEFAULT_DRAWS),
                       help=f"Monte Carlo draws (default {int(pet.DEFAULT_DRAWS)})")
    p.add_argument("--output", "-o", default="-", help="output path (default stdout)")


def _law(p):
    p.add_argument("--p", type=float, required=True, help="power parameter")
    p.add_argument("--m", type=float, required=True, help="mean")
    p.add_argument("--phi", type=float, required=True, help="dispersion")


def build_parser():
    parser = argparse.ArgumentParser(prog="petweedie",
                                     description="Poisson-exponential-Tweedie count models")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a PET regression by estimating functions")
    f.add_argument("--data", required=True)
    f.add_argument("--response", required=True)
    f.add_argument("--covariates", default="", help="comma-separated column names")
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--p-init", type=float, default=1.5, help="initial p (default 1.5)")
    f.add_argument("--phi-init", type=float, default=None,
                   help="initial phi (default: Pearson moment estimate)")
    f.add_argument("--alpha", type=float, default=0.5, help="dispersion step (default 0.5)")
    f.add_argument("--tol", type=float, default=1e-8, help="score tolerance (default 1e-8)")
    f.add_argument("--max-iter", type=int, default=200, help="iteration cap (default 200)")
    f.add_argument("--p-bounds", type=_float_list, default=list(estimating.P_BOUNDS),
                   help="lower,upper bounds for p (default 1.01,5)")
    f.add_argument("--fix-p", type=float, default=None)
    f.add_argument("--fix-phi", type=float, default=None)
    f.add_argument("--no-paic", action="store_true")
    f.add_argument("--format", choices=("json", "csv"), default="json")
    f.add_argument("--no-timestamp", action="store_true")
    _common(f, method=True)

    s = sub.add_parser("simulate", help="draw PET counts")
    _law(s)
    s.add_argument("--n", type=int, required=True)
    _common(s)

    pm = sub.add_parser("pmf", help="probability mass table")
    _law(pm)
    pm.add_argument("--y", type=_int_list, default=list(range(11)),
                    help="values, e.g. 0-10 or 0,2,5 (default 0-10)")
    pm.add_argument("--x-nodes", type=int, default=pet.X_NODES)
    pm.add_argument("--z-nodes", type=int, default=pet.Z_NODES)
    _common(pm, method=True)

    ix = sub.add_parser("indexes", help="dispersion and zero-inflation indexes")
    src = ix.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV file with a count column")
    src.add_argument("--summary", action="store_true", help="use --mean/--variance")
    src.add_argument("--theoretical", action="store_true", help="use --p/--m/--phi")
    ix.add_argument("--column", default="y")
    ix.add_argument("--mean", type=float)
    ix.add_argument("--variance", type=float)
    ix.add_argument("--zero-fraction", type=float, default=None)
    ix.add_argument("--p", type=float)
    ix.add_argument("--m", type=float)
    ix.add_argument("--phi", type=float)
    ix.add_argument("--test", action="store_true", help="bootstrap G0-dispersion test")
    ix.add_argument("--bootstrap", type=int, default=indexes.DEFAULT_BOOTSTRAP,
                    help=f"bootstrap replicates (default {indexes.DEFAULT_BOOTSTRAP})")
    ix.add_argument("--workers", type=int, default=_default_workers())
    _common(ix)

    g = sub.add_parser("gof", help="chi-square goodness of fit for a frequency table")
    g.add_argument("--freq", required=True, help="CSV with columns y,count")
    _law(g)
    g.add_argument("--pooling", type=float, default=5.0,
                   help="minimum expected count per cell (default 5)")
    g.add_argument("--n-params", type=int, default=3,
                   help="estimated parameters (default 3)")
    _common(g, method=True)

    st = sub.add_parser("simstudy", help="bias/coverage simulation study")
    st.add_argument("--config", help="JSON file with design fields")
    st.add_argument("--full", action="store_true", help="1000 replicates per scenario")
    st.add_argument("--replicates", type=int, default=None)
    st.add_argument("--workers", type=int, default=_default_workers())
    st.add_argument("--format", choices=("csv", "json"), default="csv")
    _common(st)

    c = sub.add_parser("curves", help="theoretical index curves over a grid of means")
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--phi", type=float, required=True)
    c.add_argument("--m-grid", type=_float_list, default=None, help="comma-separated means")
    c.add_argument("--m-min", type=float, default=0.1)
    c.add_argument("--m-max", type=float, default=10.0)
    c.add_argument("--m-points", type=int, default=50)
    c.add_argument("--log-grid", action="store_true")
    _common(c, seed=False)
    return parser


# handlers -----------------------------------------------------------------------------------

def _fit(args):
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    data = pio.read_csv(args.data, args.response, covs, intercept=not args.no_intercept)
    fit = estimating.chaser_fit(data, p_init=args.p_init, phi_init=args.phi_init,
                                alpha=args.alpha, tol=args.tol, max_iter=args.max_iter,
                                p_bounds=tuple(args.p_bounds), fix_p=args.fix_p,
                                fix_phi=args.fix_phi)
    if not args.no_paic:
        fit.paic, fit.paic_se = estimating.paic(fit, data, method=_pmf_method(args),
                                                draws=args.draws, seed=args.seed)
    if args.format == "json":
        text = pio.dumps(pio.fit_report(fit, args.seed, not args.no_timestamp)) + "\n"
    else:
        text = pio.coefficient_csv(fit)
    _emit(text, args.output)


def _simulate(args):
    y = pet.sample_pet(pet.PetParams(args.p, args.m, args.phi), args.n, seed=args.seed)
    _emit("y\n" + "".join(f"{v}\n" for v in y), args.output)


def _pmf(args):
    params = pet.PetParams(args.p, args.m, args.phi)
    ys = np.array(args.y)
    if args.method == "quad":
        lp = pet.logpmf_quadrature(params, ys, args.x_nodes, args.z_nodes) \
            if params.p != 1.0 else pet.logpmf(params, ys, "pgf")[0]
        se = np.zeros(ys.size)
        prob = np.exp(lp)
    elif args.method == "mc":
        prob, se = pet.pmf_mc_table(params, ys, args.draws, args.seed)
    else:
        prob = pet.pmf_pgf(params, int(ys.max()))[ys]
        se = np.zeros(ys.size)
    _emit(pio.table_csv(("y", "pmf", "std_error"), zip(ys.tolist(), prob, se)), args.output)


def _indexes(args):
    sample = None
    if args.data:
        sample = pio.read_counts(args.data, args.column)
        report = indexes.empirical_indexes(sample)
    elif args.summary:
        if args.mean is None or args.variance is None:
            raise _Usage("--summary needs --mean and --variance")
        report = indexes.summary_indexes(args.mean, args.variance, args.zero_fraction)
    else:
        if None in (args.p, args.m, args.phi):
            raise _Usage("--theoretical needs --p, --m and --phi")
        report = indexes.theoretical_indexes(pet.PetParams(args.p, args.m, args.phi))
    out = report.as_dict()
    if args.test:
        if sample is None:
            raise _Usage("--test needs raw data (--data)")
        stat, pval = indexes.g0_dispersion_test(sample, args.bootstrap, args.seed,
                                                workers=args.workers)
        out["g0_test"] = {"statistic": stat, "p_value": pval,
                          "bootstrap_reps": args.bootstrap, "seed": args.seed}
    _emit(pio.dumps(out) + "\n", args.output)


def _gof(args):
    table = pio.read_frequency_table(args.freq)
    params = pet.PetParams(args.p, args.m, args.phi)
    kw = {"draws": args.draws, "seed": args.seed} if args.method == "mc" else {}
    res = estimating.chi_square_gof(table, params, pooling=args.pooling,
                                    n_params=args.n_params, method=_pmf_method(args), **kw)
    out = {"chi2": res.chi2, "df": res.df, "p_value": res.p_value, "total": table.total,
           "cells": [{"cell": c, "observed": float(o), "expected": float(e)}
                     for c, o, e in zip(res.cells, res.observed, res.expected)]}
    _emit(pio.dumps(out) + "\n", args.output)


def _simstudy(args):
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields = json.load(fh)
        for key in ("beta", "p_values", "phi_values", "sample_sizes"):
            if key in fields:
                fields[key] = tuple(fields[key])
    if args.full:
        fields["replicates"] = 1000
    if args.replicates is not None:
        fields["replicates"] = args.replicates
    fields.setdefault("seed", args.seed)
    try:
        design = study.SimStudyDesign(**fields)
    except TypeError as exc:
        raise _Usage(f"bad study config: {exc}") from None
    result = study.run_simulation_study(design, workers=args.workers)
    if args.format == "csv":
        text = pio.study_csv(result)
    else:
        text = pio.dumps(result.as_dict()) + "\n"
    _emit(text, args.output)


def _curves(args):
    if args.m_grid is not None:
        grid = np.array(args.m_grid)
    elif args.log_grid:
        grid = np.geomspace(args.m_min, args.m_max, args.m_points)
    else:
        grid = np.linspace(args.m_min, args.m_max, args.m_points)
    _emit(pio.curves_csv(indexes.index_curves(args.p, args.phi, grid)), args.output)


HANDLERS = {"fit": _fit, "simulate": _simulate, "pmf": _pmf, "indexes": _indexes,
            "gof": _gof, "simstudy": _simstudy, "curves": _curves}


class _Usage(Exception):
    pass


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        HANDLERS[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"petweedie {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PetweedieError, ValueError, ArithmeticError, OSError) as exc:
        print(f"petweedie {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
