"""Command-line front end.

Four subcommands: estimate (point estimates from a CSV), bootstrap
(multiplier-bootstrap confidence intervals), bounds (closed-form bound
evaluation), and simulate (Monte Carlo experiments). Every run prints a
JSON report with the fully resolved config, the result payload, and a
separate meta block holding timestamp and version so determinism checks
can diff the rest byte-for-byte. Validation errors exit with status 2
and a machine-readable error object on stderr. The ATE_MATCH_THREADS
environment variable caps tree-query parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BoundInputs,
    estimate_overlap_eta,
    eval_bootstrap_bound,
    eval_cdf_rank_bound,
    eval_covariate_bound,
    eval_covariate_bound_simplified,
    eval_rank_bound,
)
from .data import InputError, load_csv
from .estimators import MatchingATE
from .inference import bootstrap_ci
from .simlab import (
    DGPS,
    get_dgp,
    mc_coverage,
    mc_kolmogorov,
    mc_radius_tail,
    mc_variance,
)


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit(args: argparse.Namespace, result: dict) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    payload = {
        "config": config,
        "result": result,
        "meta": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True, default=_default)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)


def _regressor_params(args) -> dict:
    params = {}
    if getattr(args, "knn_k", None) is not None:
        params["k"] = args.knn_k
    if getattr(args, "degree", None) is not None:
        params["degree"] = args.degree
    return params


def _fit_from_args(args) -> MatchingATE:
    ds = load_csv(args.input)
    est = MatchingATE(
        n_matches=args.matches,
        method=args.method,
        regressor=args.regressor,
        regressor_params=_regressor_params(args),
        engine=args.engine,
    )
    est.fit(ds.x, ds.d, ds.y)
    return est


def _cmd_estimate(args) -> None:
    est = _fit_from_args(args)
    ds = est.dataset_
    report = est.report_
    result = {
        "tau_hat": report.tau_hat,
        "tau_hat_bc": report.tau_hat_bc,
        "tau_reg": report.tau_reg,
        "b_hat_m": report.b_hat_m,
        "method": report.method,
        "M": report.M,
        "n": ds.n,
        "m": ds.m,
        "n_treated": ds.n_treated,
        "n_control": ds.n_control,
        "eta_hat": estimate_overlap_eta(ds),
        "extrapolation_fraction": report.extrapolation_fraction,
    }
    _emit(args, result)


def _cmd_bootstrap(args) -> None:
    est = _fit_from_args(args)
    bd = est.bootstrap(n_replicates=args.replicates, seed=args.seed)
    ci = bootstrap_ci(bd, est.tau_bc_, alpha=args.alpha)
    result = {
        "tau_hat_bc": est.tau_bc_,
        "lower": ci.lower,
        "upper": ci.upper,
        "kind": ci.kind,
        "analytic": list(ci.analytic),
        "percentile": list(ci.percentile),
        "conditional_sd": ci.conditional_sd,
        "sigma2_hat": ci.conditional_sd**2 * est.dataset_.n,
        "B": ci.B,
        "alpha": ci.alpha,
    }
    _emit(args, result)


_BOUND_MODES = {
    "covariate": eval_covariate_bound,
    "covariate-simplified": eval_covariate_bound_simplified,
    "rank": eval_rank_bound,
    "cdf": eval_cdf_rank_bound,
    "bootstrap": lambda bi: eval_bootstrap_bound(bi, which="covariate"),
    "bootstrap-rank": lambda bi: eval_bootstrap_bound(bi, which="rank"),
}


def _cmd_bounds(args) -> None:
    bi = BoundInputs(
        n=args.n,
        M=args.matches,
        eta=args.eta,
        p=args.p,
        m=args.dim,
        m_prime=args.dim_prime,
        r0=args.r0,
        gamma=tuple(args.gamma) if args.gamma else None,
        phi_err1=args.phi_err1,
        phi_err2=args.phi_err2,
        M_l=args.m_lower,
        M_u_p=args.m_upper_p,
        E1=args.e1,
        E2=args.e2,
    )
    report = _BOUND_MODES[args.mode](bi)
    result = {
        "mode": args.mode,
        "delta_h1": report.delta_h1,
        "delta_h2": report.delta_h2,
        "delta_h3": report.delta_h3,
        "b_terms": list(report.b_terms),
        "total": report.total,
        "regime_flags": report.regime_flags,
    }
    _emit(args, result)


def _cmd_simulate(args) -> None:
    dgp = get_dgp(args.dgp)
    if args.experiment == "kolmogorov":
        mc = mc_kolmogorov(
            dgp, args.n, args.matches, args.reps, args.seed, regressor=args.regressor
        )
    elif args.experiment == "coverage":
        mc = mc_coverage(
            dgp,
            args.n,
            args.matches,
            args.replicates,
            args.alpha,
            args.reps,
            args.seed,
            regressor=args.regressor,
        )
    elif args.experiment == "variance":
        mc = mc_variance(dgp, args.n, args.matches, args.reps, args.seed)
    else:
        r_grid = np.linspace(0.0, args.r_max, args.r_points)
        mc = mc_radius_tail(dgp, args.n, args.matches, args.reps, r_grid, args.seed)
    _emit(args, dataclasses.asdict(mc))


def _add_io(sub, with_input: bool = True) -> None:
    if with_input:
        sub.add_argument("--input", required=True, help="input CSV (x1..xm, d, y)")
    sub.add_argument("--output", default=None, help="write the JSON report here too")


def _add_model(sub) -> None:
    sub.add_argument("--matches", type=int, default=1, help="neighbors per unit (M)")
    sub.add_argument(
        "--method", choices=("covariate", "rank"), default="covariate",
        help="matching coordinates",
    )
    sub.add_argument(
        "--regressor", choices=("knn", "polynomial"), default="knn",
        help="bias-correction regressor",
    )
    sub.add_argument("--knn-k", type=int, default=None, help="neighbors for the knn regressor")
    sub.add_argument("--degree", type=int, default=None, help="degree for the polynomial regressor")
    sub.add_argument(
        "--engine", choices=("auto", "kdtree", "brute"), default="auto",
        help="nearest-neighbor backend",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchboot",
        description="Matching-based treatment-effect estimation, bootstrap "
        "inference, bound evaluation, and Monte Carlo experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    est = subs.add_parser("estimate", help="point estimates from a CSV file")
    _add_io(est)
    _add_model(est)
    est.set_defaults(func=_cmd_estimate)

    boot = subs.add_parser("bootstrap", help="multiplier-bootstrap confidence interval")
    _add_io(boot)
    _add_model(boot)
    boot.add_argument("--replicates", type=int, default=2000, help="bootstrap replicates (B)")
    boot.add_argument("--alpha", type=float, default=0.05, help="miscoverage level")
    boot.add_argument("--seed", type=int, default=0, help="root RNG seed")
    boot.set_defaults(func=_cmd_bootstrap)

    bnd = subs.add_parser("bounds", help="evaluate closed-form approximation bounds")
    _add_io(bnd, with_input=False)
    bnd.add_argument("--n", type=int, required=True, help="sample size")
    bnd.add_argument("--matches", type=int, required=True, help="neighbors per unit (M)")
    bnd.add_argument("--eta", type=float, required=True, help="overlap level in (0, 1/2]")
    bnd.add_argument("--p", type=float, default=1.0, help="moment-surplus parameter in (0, 1]")
    bnd.add_argument("--dim", type=int, default=1, help="covariate dimension m")
    bnd.add_argument("--dim-prime", type=int, default=None, help="transformed dimension m'")
    bnd.add_argument("--r0", type=float, default=1.0, help="within-group density-ratio floor")
    bnd.add_argument(
        "--gamma", type=float, nargs="+", default=None,
        help="regularity exponents, outer order first",
    )
    bnd.add_argument("--phi-err1", type=float, default=0.0, help="first transform-error expectation")
    bnd.add_argument("--phi-err2", type=float, default=0.0, help="second transform-error expectation")
    bnd.add_argument("--m-lower", type=float, default=1.0, help="residual-moment lower bound")
    bnd.add_argument("--m-upper-p", type=float, default=1.0, help="residual-moment upper bound")
    bnd.add_argument("--e1", type=float, default=0.0, help="sup-norm regression error")
    bnd.add_argument("--e2", type=float, default=0.0, help="sup-norm transformed regression error")
    bnd.add_argument(
        "--mode", choices=tuple(_BOUND_MODES), default="covariate",
        help="which bound family to evaluate",
    )
    bnd.set_defaults(func=_cmd_bounds)

    sim = subs.add_parser("simulate", help="run a Monte Carlo experiment")
    _add_io(sim, with_input=False)
    sim.add_argument(
        "--experiment", required=True,
        choices=("kolmogorov", "coverage", "variance", "radius-tail"),
    )
    sim.add_argument("--dgp", required=True, choices=tuple(sorted(DGPS)))
    sim.add_argument("--n", type=int, required=True, help="sample size per replication")
    sim.add_argument("--matches", type=int, required=True, help="neighbors per unit (M)")
    sim.add_argument("--reps", type=int, default=2000, help="Monte Carlo replications")
    sim.add_argument("--seed", type=int, default=0, help="root RNG seed")
    sim.add_argument("--replicates", type=int, default=2000, help="bootstrap replicates (coverage)")
    sim.add_argument("--alpha", type=float, default=0.05, help="miscoverage level (coverage)")
    sim.add_argument(
        "--regressor", choices=("knn", "polynomial"), default="polynomial",
        help="bias-correction regressor (kolmogorov, coverage)",
    )
    sim.add_argument("--r-max", type=float, default=0.05, help="largest radius grid point")
    sim.add_argument("--r-points", type=int, default=20, help="radius grid size")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        err = {"error": {"type": "invalid-input", "message": str(exc)}}
        print(json.dumps(err), file=sys.stderr)
        return 2
    except OSError as exc:
        err = {"error": {"type": "io", "message": str(exc)}}
        print(json.dumps(err), file=sys.stderr)
        return 2
    return 0
