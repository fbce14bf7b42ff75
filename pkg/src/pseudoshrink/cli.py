"""Command-line entry point ``pseudoshrink``.

Exit codes: 0 success, 2 bad arguments or inputs outside a formula's
domain, 1 computation failures (degenerate denominators, failed searches).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import detlim, shrink_gmv, shrink_prec, simlab
from .errors import ArgumentError, DomainError, PseudoshrinkError
from .plugin_est import PluginContext, hat_d, hat_h, hat_q, hat_v_derivative
from .randmat import SpectralModel, WeightMatrix, paper_mix_eigenvalues


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(f"{self.prog}: {message}")


def _read_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ArgumentError(f"{path} is not a numeric CSV matrix: {exc}") from exc


def _write_matrix(path: str, m: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(m), fmt="%.17g", delimiter=",")


def _fmt(x) -> str:
    return format(float(x), ".17g") if isinstance(x, (float, np.floating)) else str(x)


def _report(pairs: dict) -> None:
    for k, v in pairs.items():
        print(f"{k}={_fmt(v)}")


def _spectrum(arg: str, p: int | None) -> np.ndarray:
    if arg in ("identity", "paper_mix"):
        if p is None:
            raise ArgumentError(f"--p is required with --spectrum {arg}")
        return np.ones(p) if arg == "identity" else paper_mix_eigenvalues(p)
    try:
        vals = np.loadtxt(arg, delimiter=",", ndmin=1).reshape(-1)
    except OSError as exc:
        raise ArgumentError(f"cannot read spectrum file {arg}: {exc}") from exc
    if p is not None and vals.size != p:
        raise ArgumentError(f"spectrum file has {vals.size} values but --p is {p}")
    return vals


def _data(args) -> np.ndarray:
    y = _read_matrix(args.data)
    return y if args.n_is_columns else y.T


# ---------------------------------------------------------------- commands


def _cmd_limits(args) -> int:
    lam = _spectrum(args.spectrum, args.p)
    p = lam.size
    model = SpectralModel(lam)
    if args.theta == "trace":
        theta = WeightMatrix.identity_over_p(p)
    elif args.theta == "identity":
        theta = np.eye(p)
    else:
        theta = _read_matrix(args.theta)
    val = detlim.limit_moment(args.family, args.m, args.t, theta, args.cn, model).value
    print(repr(float(f"{val:.12g}")))
    return 0


def _cmd_estimate(args) -> int:
    ctx = PluginContext.from_data(_data(args))
    out = {"p": ctx.p, "n": ctx.n_obs, "effective_n": ctx.n, "c": ctx.cn, "rank": ctx.spectrum.rank}
    t = args.t
    if t == 0.0 and ctx.p <= ctx.n:
        raise DomainError("estimates at t = 0 need p > n; pass --t > 0")
    for m in range(args.max_order + 1):
        out[f"v{m}"] = hat_v_derivative(ctx, m, t)
    eye_p = 1.0 / ctx.p
    if t == 0.0:
        out["h2"] = hat_h(ctx, 2)
        out["h3"] = hat_h(ctx, 3)
        for k in (1, 2, 3):
            out[f"d{k}"] = hat_d(ctx, k, eye_p)
    else:
        out["d0"] = hat_d(ctx, 0, eye_p, t)
        out["d1"] = hat_d(ctx, 1, eye_p, t)
    out["q1"] = hat_q(ctx, 1, eye_p)
    out["q2"] = hat_q(ctx, 2, eye_p)
    _report(out)
    return 0


_PREC_METHODS = {"mp": "mp", "ridge": "ridge", "mpr": "mpr", "eb": "empirical_bayes", "or": "optimal_ridge"}


def _cmd_shrink_precision(args) -> int:
    y = _data(args)
    target = None if args.target == "identity" else _read_matrix(args.target)
    method = _PREC_METHODS[args.method]
    if method in ("empirical_bayes", "optimal_ridge"):
        if args.target != "identity":
            raise ArgumentError(f"{args.method} has no target")
        plan = shrink_prec.benchmark(method, y)
    else:
        if args.t is not None and method == "mp":
            raise ArgumentError("--t does not apply to mp")
        plan = shrink_prec.bona_fide(y, method, target, args.t)
    _write_matrix(args.out, plan.estimate)
    _report({"method": plan.method, "alpha": plan.alpha, "beta": plan.beta, "t": plan.t_star,
             "flags": ",".join(plan.flags) or "none"})
    return 0


def _cmd_shrink_gmv(args) -> int:
    y = _data(args)
    b = None if args.target == "equal" else _read_matrix(args.target).reshape(-1)
    if args.method == "mp":
        w = shrink_gmv.bona_fide_alpha_mp(y, b, form=args.form)
    else:
        w = shrink_gmv.benchmark(args.method, y, b, form=args.form)
    _write_matrix(args.out, w.weights.reshape(-1, 1))
    _report({"method": w.method, "alpha": w.alpha, "eta": w.eta, "flags": ",".join(w.flags) or "none"})
    return 0


def _cmd_simulate(args) -> int:
    over = {
        "kind": args.kind,
        "dist": args.dist,
        "n_list": args.n,
        "c_grid": args.c,
        "t_grid": args.t,
        "reps": args.reps,
        "base_seed": args.seed,
        "spectrum": args.spectrum,
        "methods": args.methods,
        "workers": args.workers,
    }
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ArgumentError(f"cannot read config {args.config}: {exc}") from exc
    else:
        text = ""
    cfg = simlab.parse_config(text, **over)
    rows = simlab.run_experiment(cfg)
    simlab.write_csv(args.out, cfg.kind, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


# ---------------------------------------------------------------- parser


def _csv_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pseudoshrink", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("limits", help="deterministic equivalent of a weighted trace moment")
    p.add_argument("--spectrum", default="identity", help="identity, paper_mix or a file with one eigenvalue per line")
    p.add_argument("--p", type=int, help="dimension (required for identity and paper_mix)")
    p.add_argument("--cn", type=float, required=True, help="concentration ratio p/n")
    p.add_argument("--family", choices=detlim.FAMILIES, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--theta", default="trace", help="trace (I/p), identity (I) or a CSV matrix file")
    p.set_defaults(func=_cmd_limits)

    def data_args(q):
        q.add_argument("--data", required=True, help="CSV data matrix, no header")
        q.add_argument("--n-is-columns", action="store_true", help="rows are variables and columns observations")

    p = sub.add_parser("estimate", help="plug-in estimates from data")
    data_args(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--max-order", type=int, default=3)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("shrink-precision", help="shrunk precision matrix")
    data_args(p)
    p.add_argument("--method", choices=sorted(_PREC_METHODS), required=True)
    p.add_argument("--target", default="identity", help="identity or a CSV matrix file")
    p.add_argument("--t", type=float, default=None, help="fixed ridge level; searched when omitted")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_shrink_precision)

    p = sub.add_parser("shrink-gmv", help="shrunk global-minimum-variance weights")
    data_args(p)
    p.add_argument("--method", choices=("mp", "reflexive", "double"), required=True)
    p.add_argument("--target", default="equal", help="equal or a CSV file of target weights")
    p.add_argument("--form", choices=("corrected", "printed"), default="corrected")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_shrink_gmv)

    p = sub.add_parser("simulate", help="Monte Carlo study written as CSV")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--kind", choices=simlab.KINDS)
    p.add_argument("--dist", choices=("normal", "scaled_t5"))
    p.add_argument("--n", type=_csv_list)
    p.add_argument("--c", type=_csv_list)
    p.add_argument("--t", type=_csv_list)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--spectrum")
    p.add_argument("--methods", type=_csv_list)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ArgumentError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PseudoshrinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
