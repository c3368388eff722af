"""Command-line front end.

Every solver is exposed as a subcommand with file-based input and output,
so runs can be scripted and compared byte-for-byte. Exit codes: 0 success,
2 input error, 3 infeasibility or order violation (a certificate is still
written), 4 solver nonconvergence.

The environment variable KANTLAB_TOL, when set, overrides the default
feasibility tolerance of the convex-order and martingale subcommands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .convex_order import (
    check_convex_order_1d,
    check_convex_order_lp,
)
from .errors import InfeasibleError, KantLabError, NonconvergenceError, OrderViolationError
from .lp_transport import kr_norm, load_cost_csv, solve_transport
from .martingale import build_martingale_coupling
from .measures import (
    ConditionalKernel,
    DiscreteMeasure,
    MomentMap,
    measure_from_json,
)
from .nonlinear import (
    Dictionary,
    MongeCDOptions,
    cost_from_json,
    eval_J_gp,
    eval_J_xp,
    eval_J_xyp,
    solve_fixed_barycenter,
    solve_monge_cd,
)
from .sweeps import rows_to_csv, rows_to_json, run_map_sweep, run_kernel_sweep

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGED = 4


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, path: str | None) -> None:
    """Atomic file write (temp + rename) so failures leave no partial file."""
    if path is None:
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".kantlab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _moment_map(spec: str, fallback_dim: int) -> MomentMap:
    if spec == "identity":
        return MomentMap.identity(fallback_dim)
    obj = json.loads(_read(spec))
    return MomentMap.from_table(np.asarray(obj["atoms"], float), np.asarray(obj["values"], float))


def _env_tol(default: float) -> float:
    raw = os.environ.get("KANTLAB_TOL")
    return float(raw) if raw else default


def _cmd_transport(args) -> int:
    cost = load_cost_csv(args.cost)
    mu = measure_from_json(_read(args.mu))
    nu = measure_from_json(_read(args.nu))
    plan = solve_transport(cost, mu, nu)
    _emit(plan.to_json() + "\n", args.output)
    return EXIT_OK


def _cmd_krnorm(args) -> int:
    p = measure_from_json(_read(args.p))
    q = measure_from_json(_read(args.q))
    value = kr_norm(p, q)
    if args.format == "csv":
        _emit("value\n%.17g\n" % value, args.output)
    else:
        _emit(json.dumps({"value": value}) + "\n", args.output)
    return EXIT_OK


def _cmd_convex_order(args) -> int:
    mu = measure_from_json(_read(args.mu))
    nu = measure_from_json(_read(args.nu))
    if args.method == "1d" or (args.method == "auto" and mu.dim == 1 and nu.dim == 1):
        cert = check_convex_order_1d(mu, nu)
    else:
        cert = check_convex_order_lp(mu, nu)
    _emit(cert.to_json() + "\n", args.output)
    return EXIT_OK if cert.dominated else EXIT_INFEASIBLE


def _cmd_martingale(args) -> int:
    zeta = measure_from_json(_read(args.zeta))
    nu = measure_from_json(_read(args.nu))
    F = _moment_map(args.moment, zeta.dim)
    try:
        coupling = build_martingale_coupling(zeta, nu, F, tol=_env_tol(1e-9))
    except OrderViolationError as exc:
        if exc.certificate is not None:
            _emit(exc.certificate.to_json() + "\n", args.output)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit(coupling.to_json() + "\n", args.output)
    return EXIT_OK


def _cmd_kfix(args) -> int:
    mu = measure_from_json(_read(args.mu))
    entries = tuple(
        measure_from_json(json.dumps(o)) for o in json.loads(_read(args.dictionary))
    )
    beta = measure_from_json(_read(args.beta))
    h = cost_from_json(_read(args.cost))
    try:
        plan = solve_fixed_barycenter(mu, Dictionary(entries), h, beta)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    obj = {
        "weights": [[float(v) for v in row] for row in plan.weights],
        "phi": [float(v) for v in plan.phi],
        "psi": [float(v) for v in plan.psi],
        "value": float(plan.value),
    }
    _emit(json.dumps(obj) + "\n", args.output)
    return EXIT_OK


def _cmd_eval(args) -> int:
    k = ConditionalKernel.from_json(_read(args.kernel))
    h = cost_from_json(_read(args.cost))
    if args.kind == "xp":
        value = eval_J_xp(k, h)
    elif args.kind == "xyp":
        value = eval_J_xyp(k, h)
    else:
        F = _moment_map(args.moment, k.x_atoms.shape[1])
        value = eval_J_gp(k, h, F)
    _emit(json.dumps({"kind": args.kind, "value": value}) + "\n", args.output)
    return EXIT_OK


def _cmd_monge_cd(args) -> int:
    mu = measure_from_json(_read(args.mu))
    nu = measure_from_json(_read(args.nu))
    h = cost_from_json(_read(args.cost))
    F = _moment_map(args.moment, nu.dim)
    opts = MongeCDOptions(seed=args.seed)
    res = solve_monge_cd(mu, nu, F, h, opts)
    obj = {
        "T": [[float(v) for v in row] for row in res.T.values],
        "value": float(res.value),
        "status": res.status,
        "iterations": res.iterations,
        "seed": res.seed,
    }
    _emit(json.dumps(obj) + "\n", args.output)
    if res.status != "converged":
        print("error: solver stopped at iteration limit", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_paper(args) -> int:
    grid_rule = (lambda n: args.grid) if args.grid else None
    if args.which == "thm2":
        rows = run_kernel_sweep(args.nmax, m_rule=grid_rule)
        title = "kernel sweep: measured cost vs 2^-n"
    else:
        which = 1 if args.which == "ex1" else 2
        rows = run_map_sweep(which, args.nmax, grid_rule=grid_rule)
        title = f"map sweep {args.which}: measured cost vs bound"
    meta = {"which": args.which, "nmax": args.nmax, "grid": args.grid, "seed": 0}
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows, meta) + "\n"
    _emit(text, args.output)
    if args.output and args.plot:
        from .plots import render_sweep_figure
        fig_path = os.path.splitext(args.output)[0] + ".png"
        render_sweep_figure(rows, fig_path, title)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kantlab",
        description="Numerical laboratory for transport problems with "
                    "conditional-measure costs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def out_opts(p, formats=("json", "csv")):
        p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("transport", help="solve a linear transport problem")
    p.add_argument("cost", help="cost matrix CSV (row-major, no header)")
    p.add_argument("mu")
    p.add_argument("nu")
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_transport)

    p = sub.add_parser("krnorm", help="Kantorovich-Rubinshtein norm of p - q")
    p.add_argument("p")
    p.add_argument("q")
    out_opts(p)
    p.set_defaults(fn=_cmd_krnorm)

    p = sub.add_parser("convex-order", help="convex dominance check with certificate")
    p.add_argument("mu")
    p.add_argument("nu")
    p.add_argument("--method", choices=("auto", "1d", "lp"), default="auto")
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_convex_order)

    p = sub.add_parser("martingale", help="build a martingale coupling")
    p.add_argument("zeta")
    p.add_argument("nu")
    p.add_argument("--moment", default="identity",
                   help="'identity' or a moment-map table JSON path")
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_martingale)

    p = sub.add_parser("kfix", help="fixed-barycenter dictionary transport")
    p.add_argument("mu")
    p.add_argument("dictionary", help="JSON array of measures")
    p.add_argument("beta", help="barycenter measure JSON")
    p.add_argument("--cost", required=True, help="cost family JSON")
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_kfix)

    p = sub.add_parser("eval", help="evaluate a cost functional on a kernel")
    p.add_argument("kernel")
    p.add_argument("cost")
    p.add_argument("--kind", choices=("xp", "xyp", "gp"), required=True)
    p.add_argument("--moment", default="identity")
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("monge-cd", help="Monge problem under convex dominance")
    p.add_argument("mu")
    p.add_argument("nu")
    p.add_argument("--cost", required=True)
    p.add_argument("--moment", default="identity")
    p.add_argument("--seed", type=int, default=0)
    out_opts(p, formats=("json",))
    p.set_defaults(fn=_cmd_monge_cd)

    p = sub.add_parser("paper", help="run a convergence sweep and emit its table")
    p.add_argument("--which", choices=("thm2", "ex1", "ex2"), required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--grid", type=int, default=None,
                   help="fixed grid size for every level (default: per-level rule)")
    p.add_argument("--no-plot", dest="plot", action="store_false",
                   help="skip the figure rendered alongside a file output")
    out_opts(p, formats=("csv", "json"))
    p.set_defaults(fn=_cmd_paper, plot=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NonconvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (OrderViolationError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (KantLabError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
