"""Command line interface.

Subcommands: prior, posterior, convergence, stability, estimators,
calibrate, compare, clt, gen.  Exit codes: 0 success, 2 input error,
3 feasibility or degeneracy error, 4 capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import KercorrError
from .experiments import (
    ExperimentConfig,
    gen_data,
    run_calibrate,
    run_clt,
    run_compare,
    run_convergence,
    run_estimator_comparison,
    run_posterior,
    run_prior,
    run_stability,
)


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_common(p: argparse.ArgumentParser, *, need_out=False):
    p.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")
    p.add_argument("--kernel", default="gaussian:sigma=1.0",
                   help="kernel text form, e.g. gaussian:sigma=1.0 or setwise:a=0,b=0.95")
    p.add_argument("--c", type=float, default=1.0, help="group concentration")
    p.add_argument("--c0", type=float, default=1.0, help="root concentration")
    p.add_argument("--p0", default="uniform:a=0,b=1",
                   help="base measure, uniform:a=..,b=.. or normal:mu=..,var=..")
    p.add_argument("--m", type=int, default=10_000,
                   help="blocks (sampling) / base-measure proxy size (analytics)")
    p.add_argument("--r", type=int, default=1_000, help="recorded Gibbs sweeps")
    p.add_argument("--burnin", type=int, default=100, help="burn-in sweeps")
    p.add_argument("--data", default=None, help="grouped CSV (columns group,value)")
    p.add_argument("--out", default=None, required=need_out, help="output path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip rendering PNG figures next to experiment tables")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kercorr",
        description="Kernel correlation between random probability measures "
                    "in two-group Bayesian models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prior", help="prior correlation, closed form and/or sampled")
    _add_common(p)
    p.add_argument("--method", choices=("closed", "sampling", "both"), default="closed")

    p = sub.add_parser("posterior", help="posterior correlation on a dataset")
    _add_common(p)
    p.add_argument("--method", choices=("analytics", "sampling"), default="analytics")

    p = sub.add_parser("convergence", help="posterior decay across an (n1, n2) grid")
    _add_common(p)
    p.add_argument("--i-grid", type=_int_list, default=[2, 3, 4],
                   help="exponents i with n1 = 4^i")
    p.add_argument("--j-grid", type=_int_list, default=[2, 3, 4],
                   help="exponents j with n2 = 5^j")
    p.add_argument("--kernels", type=_str_list, default=None,
                   help="comma-separated kernel texts")

    p = sub.add_parser("stability", help="sensitivity to kernel hyperparameters")
    _add_common(p)
    p.add_argument("--n-grid", type=_int_list, default=[0, 10, 100, 1000])
    p.add_argument("--kernels", type=_str_list, default=None)

    p = sub.add_parser("estimators", help="spread of the two posterior estimators")
    _add_common(p)
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2", type=int, default=10)
    p.add_argument("--replications", type=int, default=100)

    p = sub.add_parser("calibrate", help="match prior moments across models")
    _add_common(p)
    p.add_argument("--v", type=float, default=0.25, help="target prior kernel variance")
    p.add_argument("--xi", type=float, default=0.5, help="target prior kernel correlation")
    p.add_argument("--t2", type=float, default=2.0, help="marginal observable variance")
    p.add_argument("--sigma", type=float, default=None,
                   help="Gaussian kernel width (default: sigma*/sqrt(2))")

    p = sub.add_parser("compare", help="cross-model predictive comparison")
    _add_common(p)
    p.add_argument("--xi-grid", type=_float_list, default=[0.01, 0.5, 0.99])
    p.add_argument("--v", type=float, default=0.25)
    p.add_argument("--t2", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--n1", type=int, default=200)
    p.add_argument("--n2", type=int, default=5)

    p = sub.add_parser("clt", help="estimator variance decay across block counts")
    _add_common(p)
    p.add_argument("--m-grid", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--replications", type=int, default=50)

    p = sub.add_parser("gen", help="generate a grouped dataset")
    _add_common(p, need_out=True)
    p.add_argument("--model", choices=("hdp", "hdp-shifted", "gauss"), default="hdp")
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2", type=int, default=10)
    p.add_argument("--t2", type=float, default=2.0)
    p.add_argument("--s2", type=float, default=1.0)
    p.add_argument("--tau2", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.5)

    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = ExperimentConfig.__dataclass_fields__
    kwargs = {"experiment": args.command, "seed": args.seed}
    for name, value in vars(args).items():
        key = name.replace("-", "_")
        if key in fields and value is not None and key not in kwargs:
            kwargs[key] = value
    if getattr(args, "kernels", None):
        kwargs["kernels"] = args.kernels
    return ExperimentConfig(**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "prior":
            result = run_prior(cfg)
            print(json.dumps(result, indent=2))
        elif args.command == "posterior":
            report = run_posterior(cfg)
            print(report.to_json(indent=2))
        elif args.command == "convergence":
            result = run_convergence(cfg)
            print(json.dumps({"slopes": result.slopes}, indent=2))
        elif args.command == "stability":
            table = run_stability(cfg)
            print(table.to_string(index=False))
        elif args.command == "estimators":
            summary = run_estimator_comparison(cfg)
            print(summary.to_string(index=False))
        elif args.command == "calibrate":
            print(json.dumps(run_calibrate(cfg), indent=2))
        elif args.command == "compare":
            result = run_compare(cfg)
            for name, mat in result["matrices"].items():
                print(f"# {name}")
                print(mat.to_string())
        elif args.command == "clt":
            report = run_clt(cfg)
            print(json.dumps(report.to_dict(), indent=2))
        elif args.command == "gen":
            x1, x2 = gen_data(cfg)
            print(f"wrote {len(x1)} + {len(x2)} observations to {cfg.out}")
    except KercorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
