"""Command-line interface.

Three subcommands:

* ``calibrate`` -- print the spectral summary and every privacy calibration
  scalar for a dataset and budget, as JSON.
* ``run``       -- run the knockoff filter once on CSV data and print the
  selection report as JSON.
* ``simulate``  -- run a Monte Carlo sweep from a config file and write CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .design import compute_bounds, load_dataset, normalize_columns
from .errors import DPKnockoffError, PrivacyPreconditionFailed
from .knockoffs import (
    choose_s,
    closed_form_gram_eigenvalues,
    gram_spectrum,
    raw_gram_frobenius,
)
from .pipeline import run_knockoff_filter
from .privacy import (
    PrivacyBudget,
    build_sensitivity_context,
    delta2_floor,
    estimate_sensitivity,
    gaussian_scale,
    gram_sensitivities,
    laplace_scale,
    pair_crossprod_sensitivity,
)
from .simulate import read_config, run_sweep, with_overrides, write_plot_data, write_report


def _add_data_flags(parser):
    parser.add_argument("--x", required=True, help="CSV file with the design matrix")
    parser.add_argument("--y", required=True, help="file with one response value per line")
    parser.add_argument("--header", action="store_true", help="skip one header line per file")
    parser.add_argument(
        "--row-bound", type=float, default=None,
        help="override for the row-norm bound B (default: observed max row norm)",
    )


def _add_budget_flags(parser):
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--eps1", type=float, default=None)
    parser.add_argument("--eps2", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--delta1", type=float, default=None)
    parser.add_argument("--delta2", type=float, default=None)
    parser.add_argument("--beta-norm-bound", type=float, default=None)
    parser.add_argument("--sigma2-bound", type=float, default=None)


def _budget_from_args(args) -> PrivacyBudget:
    return PrivacyBudget(
        eps=args.eps,
        delta_1=args.delta1,
        delta_2=args.delta2,
        eps_1=args.eps1,
        eps_2=args.eps2,
        delta=args.delta,
    )


def _oracle_from_args(args):
    from .design import ModelOracle

    if args.beta_norm_bound is None or args.sigma2_bound is None:
        raise DPKnockoffError("--beta-norm-bound and --sigma2-bound are required here")
    return ModelOracle(beta_norm_bound=args.beta_norm_bound, sigma2_bound=args.sigma2_bound)


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def cmd_calibrate(args) -> int:
    dataset = load_dataset(args.x, args.y, has_header=args.header)
    nd = normalize_columns(dataset)
    spectrum = gram_spectrum(nd)
    s = choose_s(spectrum, "private_recommended")
    g_max, g_min = closed_form_gram_eigenvalues(spectrum, s)
    bounds = compute_bounds(dataset, args.row_bound)
    budget = _budget_from_args(args)
    oracle = _oracle_from_args(args)
    ctx = build_sensitivity_context(
        bounds, oracle, spectrum, raw_gram_frobenius(nd, spectrum), budget, dataset.p
    )
    lam_sens, frob_sens = gram_sensitivities(ctx)
    m1_sens = pair_crossprod_sensitivity(ctx)
    try:
        m2_sens = estimate_sensitivity(ctx, args.ridge)
    except PrivacyPreconditionFailed:
        m2_sens = None

    method = str(args.method)
    if method == "1":
        budget.require_pair_release()
        theta1 = laplace_scale(lam_sens, budget.eps_1)
        kappa1 = gaussian_scale(frob_sens, budget.eps_2, budget.delta)
        kappa_field = gaussian_scale(m1_sens, budget.eps, budget.delta_1)
        total_eps, total_delta = budget.pair_release_totals()
    else:
        theta1 = laplace_scale(lam_sens, budget.eps_1) if budget.eps_1 else None
        kappa1 = (
            gaussian_scale(frob_sens, budget.eps_2, budget.delta)
            if budget.eps_2 and budget.delta
            else None
        )
        kappa_field = (
            gaussian_scale(m2_sens, budget.eps, budget.delta_1) if m2_sens is not None else None
        )
        total_eps, total_delta = budget.estimate_release_totals()

    record = {
        "n": dataset.n,
        "p": dataset.p,
        "lambda_min": spectrum.lambda_min,
        "lambda_max": spectrum.lambda_max,
        "s": s,
        "g_lambda_max": g_max,
        "g_lambda_min": g_min,
        "row_bound_B": bounds.row_bound_B,
        "col_min_C": bounds.col_min_C,
        "eta2": ctx.eta2,
        "zeta": ctx.zeta,
        "gamma": ctx.gamma,
        "lambda_min_sens": lam_sens,
        "gram_frob_sens": frob_sens,
        "delta2_floor": delta2_floor(dataset.p),
        "method1_sensitivity": m1_sens,
        "method2_sensitivity": m2_sens,
        "theta1_scale": theta1,
        "kappa1_sq": kappa1,
        "kappa2_sq_or_kappa_sq": kappa_field,
        "total_eps": total_eps,
        "total_delta": total_delta,
    }
    print(json.dumps(record, indent=2))
    return 0


def cmd_run(args) -> int:
    dataset = load_dataset(args.x, args.y, has_header=args.header)
    method = str(args.method)
    budget = None
    oracle = None
    if method != "none":
        budget = _budget_from_args(args)
        oracle = _oracle_from_args(args)
    result = run_knockoff_filter(
        dataset,
        q=args.q,
        stat=args.stat,
        method=method,
        budget=budget,
        oracle=oracle,
        lam=getattr(args, "lambda"),
        ridge_omega2=args.ridge,
        row_bound_override=args.row_bound,
        seed=args.seed,
    )
    report = result.report
    if result.release is not None:
        noise_scales = dict(result.release.noise_scales)
        eps_total, delta_total = result.release.total_privacy()
    else:
        noise_scales = {}
        eps_total, delta_total = 0.0, 0.0
    record = {
        "selected": sorted(report.selected),
        "threshold": _json_value(report.threshold_t),
        "statistics": [float(v) for v in report.w.w],
        "statistic_kind": report.w.statistic_kind,
        "q": report.q,
        "method": method,
        "noise_scales": noise_scales,
        "total_privacy": {"eps": eps_total, "delta": delta_total},
    }
    print(json.dumps(record, indent=2))
    return 0


def cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, threads=args.threads)
    report = run_sweep(cfg)
    write_report(report, args.out)
    if args.emit_plot_data:
        write_plot_data(report, args.emit_plot_data)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpknockoff",
        description="FDR-controlled variable selection with private statistic release",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="print spectral and privacy calibration scalars")
    _add_data_flags(cal)
    _add_budget_flags(cal)
    cal.add_argument("--method", choices=("1", "2"), default="1")
    cal.add_argument("--ridge", type=float, default=0.0)
    cal.set_defaults(func=cmd_calibrate)

    run = sub.add_parser("run", help="run the knockoff filter once")
    _add_data_flags(run)
    _add_budget_flags(run)
    run.add_argument("--method", choices=("none", "1", "2"), default="none")
    run.add_argument("--stat", choices=("lcd", "csm"), default="lcd")
    run.add_argument("--q", type=float, default=0.2)
    run.add_argument("--lambda", type=float, default=0.0, help="lasso penalty (0 = OLS)")
    run.add_argument("--ridge", type=float, default=0.0, help="ridge term omega^2")
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=cmd_run)

    sim = sub.add_parser("simulate", help="run a Monte Carlo sweep from a config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--seed", type=int, default=None, help="override base_seed")
    sim.add_argument("--threads", type=int, default=None, help="override thread count")
    sim.add_argument(
        "--emit-plot-data", default=None, metavar="PATH",
        help="also write a plotting-oriented CSV to PATH",
    )
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DPKnockoffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
