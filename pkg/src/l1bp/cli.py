"""Command-line entry point: ``python -m l1bp <command> ...``.

Exit status is 0 on success, 1 for bad arguments and 2 for runtime or I/O
failures.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .amp_solver import AmpConfig, run_amp
from .bp_solver import BpConfig, run_bp
from .instance_gen import (DenseMeasurementMatrix, EnsembleSpec, RngSeed,
                           SparseMeasurementMatrix, load_instance, make_instance,
                           save_instance)
from .l1_oracle import brute_force_l1, certificate_details
from .result import SUCCESS_TOL
from .state_evolution import QuadratureSpec

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _common(p, *, grid=False, instance=False):
    p.add_argument("--n", type=int, nargs="+" if grid else None, default=[1000] if grid else 1000)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--j", type=int, default=None, help="column degree (sparse)")
    p.add_argument("--k", type=int, default=None, help="row degree (sparse)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--success-tol", type=float, default=SUCCESS_TOL)
    p.add_argument("--tol", type=float, default=1e-10, help="convergence tolerance")
    p.add_argument("--out", default=None)
    if grid:
        p.add_argument("--rho", type=float, nargs="+", default=None)
        p.add_argument("--rho-min", type=float, default=None)
        p.add_argument("--rho-max", type=float, default=None)
        p.add_argument("--rho-step", type=float, default=None)
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--records", default=None, help="per-trial CSV path")
        p.add_argument("--chart", default=None, help="SVG chart path")
    else:
        p.add_argument("--rho", type=float, default=0.1)
    if instance:
        p.add_argument("--in", dest="infile", default=None,
                       help="read the instance from a file instead of generating it")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="l1bp", description="l1 recovery by message passing")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a random instance (sparse if --j/--k given)")
    _common(p)

    for name, what in (("bp", "sparse"), ("amp", "dense")):
        p = sub.add_parser(name, help=f"solve one {what} instance")
        _common(p, instance=True)

    p = sub.add_parser("sweep", help="success probability over an (n, rho) grid")
    p.add_argument("--solver", choices=("bp", "amp"), default="amp")
    _common(p, grid=True)

    p = sub.add_parser("de", help="sparse sweep with the graph re-drawn every sweep")
    _common(p, grid=True)

    p = sub.add_parser("se", help="state-evolution threshold and trajectory")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=None, help="also print the trajectory here")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--method", choices=("quadrature", "closed"), default="quadrature")
    p.add_argument("--nodes", type=int, default=201)
    p.add_argument("--bisect-tol", type=float, default=1e-4)
    p.add_argument("--out", default=None, help="trajectory CSV path")

    p = sub.add_parser("oracle", help="exact l1 minimiser of a small dense instance")
    _common(p, instance=True)
    return ap


def _sparse_degrees(args):
    if (args.j is None) != (args.k is None):
        raise UsageError("--j and --k must be given together")
    return args.j, args.k


def _spec(args, n, sparse_default=None):
    j, k = _sparse_degrees(args)
    if j is None and sparse_default:
        j, k = sparse_default
    try:
        return EnsembleSpec.regular(n, j, k) if j is not None else EnsembleSpec.dense(n, args.alpha)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _instance(args, sparse):
    if getattr(args, "infile", None):
        inst = load_instance(args.infile)
        want = SparseMeasurementMatrix if sparse else DenseMeasurementMatrix
        if not isinstance(inst.matrix, want):
            raise UsageError(f"{args.infile} does not hold a {'sparse' if sparse else 'dense'} matrix")
        return inst
    if not 0.0 <= args.rho <= 1.0:
        raise UsageError("--rho must lie in [0, 1]")
    if not sparse and args.j is not None:
        raise UsageError("--j/--k describe a sparse ensemble; amp and oracle need a dense one")
    spec = _spec(args, args.n, (10, 20) if sparse else None)
    return make_instance(spec, args.rho, RngSeed(args.seed))


def _report(res, out):
    print(f"iterations={res.iterations} converged={res.converged} "
          f"residual_inf={res.residual_inf:.3e}")
    if res.mse_vs_truth is not None:
        print(f"mse={res.mse_vs_truth:.3e} success={res.success}")
    if out:
        np.savetxt(out, res.x_hat, fmt="%.17g")


def cmd_gen(args):
    if not 0.0 <= args.rho <= 1.0:
        raise UsageError("--rho must lie in [0, 1]")
    if not args.out:
        raise UsageError("gen needs --out")
    F, x, y = make_instance(_spec(args, args.n), args.rho, RngSeed(args.seed))
    save_instance(args.out, F, x, y)
    print(f"wrote {args.out}: n={F.n} m={F.m} nonzeros={int(np.count_nonzero(x.values))}")


def cmd_bp(args):
    F, x, y = _instance(args, sparse=True)
    cfg = BpConfig(max_iters=args.max_iters or 1000, convergence_tol=args.tol)
    _report(run_bp(F, y, cfg, truth=x, success_tol=args.success_tol), args.out)


def cmd_amp(args):
    F, x, y = _instance(args, sparse=False)
    cfg = AmpConfig(max_iters=args.max_iters or 10000, convergence_tol=args.tol)
    _report(run_amp(F, y, cfg, truth=x, success_tol=args.success_tol), args.out)


def _grid(args):
    if args.rho is not None:
        if any(v is not None for v in (args.rho_min, args.rho_max, args.rho_step)):
            raise UsageError("give either --rho or --rho-min/--rho-max/--rho-step")
        return tuple(args.rho)
    if None in (args.rho_min, args.rho_max, args.rho_step):
        raise UsageError("need --rho or all of --rho-min, --rho-max, --rho-step")
    return ex.rho_grid(args.rho_min, args.rho_max, args.rho_step)


def _sweep(args, solver):
    j, k = _sparse_degrees(args)
    if solver == "amp" and j is not None:
        raise UsageError("--j/--k do not apply to the dense solver")
    j, k = (j, k) if j is not None else (10, 20)
    alpha = j / k if solver != "amp" else args.alpha
    try:
        cfg = ex.SweepConfig(solver=solver, n_list=tuple(args.n), rhos=_grid(args), alpha=alpha,
                             j=j, k=k, trials=args.trials, base_seed=args.seed,
                             max_iters=args.max_iters, success_tol=args.success_tol,
                             tol=args.tol, threads=args.threads)
    except ValueError as err:
        raise UsageError(str(err)) from None
    table = ex.run_sweep(cfg)
    print(",".join(ex.AGGREGATE_HEADER))
    for a in table.aggregates:
        print(",".join(ex._cell(getattr(a, h)) for h in ex.AGGREGATE_HEADER))
    if args.out:
        ex.emit_csv(table, args.out)
    if args.records:
        ex.emit_csv(table, args.records, "records")
    if args.chart:
        ex.emit_chart(table, args.chart)


def cmd_sweep(args):
    _sweep(args, args.solver)


def cmd_de(args):
    _sweep(args, "de")


def cmd_se(args):
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.rho is not None and not 0.0 <= args.rho <= 1.0:
        raise UsageError("--rho must lie in [0, 1]")
    try:
        quad = QuadratureSpec(nodes=args.nodes, method=args.method)
    except ValueError as err:
        raise UsageError(str(err)) from None
    rho_c, traj = ex.run_se(args.alpha, quad, args.bisect_tol, args.rho, args.iters)
    print(f"alpha={args.alpha} rho_c={rho_c:.6f}")
    if traj:
        print("t,mse,c")
        for t, mse, c in traj:
            print(f"{t},{mse!r},{c!r}")
        if args.out:
            ex.write_trajectory_csv(traj, args.out)


def cmd_oracle(args):
    F, x, y = _instance(args, sparse=False)
    if F.n > 16:
        raise UsageError("the exhaustive oracle handles n <= 16")
    res = brute_force_l1(F, y)
    cert = certificate_details(F, y, res.x_star)
    print(f"l1={res.l1_value!r} unique={res.unique} certificate_ok={cert['ok']}")
    print(f"matches_truth={bool(np.max(np.abs(res.x_star - x.values)) <= 1e-8)}")
    print("x_star=" + " ".join(f"{v:.10g}" for v in res.x_star))
    if args.out:
        np.savetxt(args.out, res.x_star, fmt="%.17g")


COMMANDS = {"gen": cmd_gen, "bp": cmd_bp, "amp": cmd_amp, "sweep": cmd_sweep,
            "de": cmd_de, "se": cmd_se, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except UsageError as err:
        print(f"l1bp {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as err:
        print(f"l1bp {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
