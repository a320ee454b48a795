"""``ist-opt`` command line: run, sweep, plot, verify."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .experiments import (
    EXIT_CODES,
    ExperimentConfig,
    build_benchmark,
    emit_plot,
    load_config,
    records_from_dir,
    run_experiment,
    run_sweep,
)
from .geometry import HessianOperator, christoffel_ambient, christoffel_projected, dmetric, dmetric_adjoint
from .kernels import mat_exp
from .manifold import inner, metric_inverse_apply, metric_matrix, project, project_closed_form, project_lyapunov, random_point, random_tangent
from .oracles import FDBasis, OracleHessian, check_identity_eq, fd_dmetric, null_complement
from .solvers import METHODS, Status

EX_USAGE = 64
SEED_ENV = "IST_OPT_SEED"

# flag dest -> ExperimentConfig field
_FLAG_FIELDS = {
    "n": "n", "p": "p", "pplus": "p_plus", "metric": "metric", "rho": "rho",
    "method": "method", "seed": "seed", "outer_tol": "outer_tol", "inner_tol": "inner_tol",
    "switch_tol": "switch_tol", "max_outer": "max_outer", "max_inner": "max_inner",
    "out": "out_dir", "timing": "record_time",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_flags(sp, with_grid: bool = True):
    sp.add_argument("--config", help="key = value file; explicit flags win")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--pplus", type=int)
    if with_grid:
        sp.add_argument("--metric", choices=("g1", "g2"))
        sp.add_argument("--rho", type=float)
        sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--outer-tol", type=float)
    sp.add_argument("--inner-tol", type=float)
    sp.add_argument("--switch-tol", type=float)
    sp.add_argument("--max-outer", type=int)
    sp.add_argument("--max-inner", type=int)
    sp.add_argument("--out")
    sp.add_argument("--timing", action="store_true", default=None,
                    help="write wall-clock time_ms (otherwise 0, keeping CSVs reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ist-opt", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    _add_run_flags(sub.add_parser("run", help="run one configuration"))
    _add_run_flags(sub.add_parser("sweep", help="metric x rho x method grid"), with_grid=False)

    pp = sub.add_parser("plot", help="SVG of every CSV in a directory")
    pp.add_argument("--in", dest="indir", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--title", default="")

    vp = sub.add_parser("verify", help="check analytic formulas against the oracles")
    vp.add_argument("--seed", type=int, default=0)
    vp.add_argument("--metric", choices=("g1", "g2"), action="append")
    vp.add_argument("--rho", type=float, action="append")
    return parser


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def resolve_config(args) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags, then ``IST_OPT_SEED``."""
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(load_config(args.config))
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
        except ValueError as e:
            raise UsageError(f"{args.config}: {e}") from None
    for dest, name in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    seed = _env_seed()
    if seed is not None:
        values["seed"] = seed
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


def sweep_exit_code(results) -> int:
    """3 if any cell had an inner failure, else the worst code among second-order cells.

    First-order cells running out of budget is expected on this benchmark and
    does not fail the sweep.
    """
    if any(r.trace.status is Status.INNER_FAILURE for r in results):
        return EXIT_CODES[Status.INNER_FAILURE]
    return max([r.exit_code for r in results if r.config.method in ("hybrid", "newton")], default=0)


def _cmd_run(args) -> int:
    cfg = resolve_config(args)
    res = run_experiment(cfg)
    tr = res.trace
    last = tr.records[-1]
    print(f"{cfg.stem}: {tr.status.value} after {tr.iterations} iterations, "
          f"f = {last.f:.12g}, |grad f| = {last.gradnorm:.3e} -> {res.csv_path}")
    return res.exit_code


def _cmd_sweep(args) -> int:
    base = resolve_config(args)
    results = run_sweep(base)
    for r in results:
        tr = r.trace
        print(f"{r.config.stem:20s} {tr.status.value:14s} iters={tr.iterations:4d} "
              f"newton={tr.phase_iterations('newton'):2d} |grad f|={tr.records[-1].gradnorm:.3e}")
    return sweep_exit_code(results)


def _cmd_plot(args) -> int:
    indir = Path(args.indir)
    if not indir.is_dir():
        raise UsageError(f"{indir} is not a directory")
    records = records_from_dir(indir)
    if not records:
        raise UsageError(f"no CSV files in {indir}")
    path = emit_plot(records, args.out, args.title)
    print(f"wrote {path}")
    return 0


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def verify_rows(seed: int, metrics=("g1", "g2"), rhos=(1.0,)):
    """``(check, metric, rho, error, tol)`` for each oracle comparison at a random point."""
    rows = []
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((6, 6))
    rows.append(("mat_exp vs scipy", "-", float("nan"), _rel(mat_exp(S), scipy.linalg.expm(S)), 1e-12))
    for metric in metrics:
        for rho in rhos:
            bench = build_benchmark(ExperimentConfig(seed=seed, metric=metric, rho=rho))
            W = random_point(bench.spec, seed + 1)
            xi, eta = random_tangent(W, rng), random_tangent(W, rng)
            Y = rng.standard_normal(W.X.shape)
            H = rng.standard_normal((W.spec.n, W.spec.n))
            H = H + H.T
            basis = FDBasis(W)
            derivs = bench.problem.derivatives(W.X)
            G = metric_matrix(W)
            pair = inner(W, dmetric_adjoint(W, H), xi)
            checks = [
                ("identity with X_perp", check_identity_eq(W, null_complement(W).Xperp), 1e-9),
                ("projection Lyapunov vs closed form",
                 _rel(project_lyapunov(W, Y), project_closed_form(W, Y)), 1e-10),
                ("DG vs finite differences", _rel(dmetric(W, xi), fd_dmetric(W, xi)), 1e-6),
                ("adjoint pairing", abs(pair - np.trace(H @ dmetric(W, xi))) / max(abs(pair), 1.0), 1e-9),
                ("adjoint vs FD assembly", _rel(dmetric_adjoint(W, H), basis.adjoint(H)), 1e-6),
                ("projected Christoffel fast path",
                 _rel(christoffel_projected(W, xi, eta), project(W, christoffel_ambient(W, xi, eta))), 1e-9),
                ("Hessian vs FD/Koszul oracle",
                 _rel(HessianOperator(W, derivs)(xi), OracleHessian(W, derivs)(xi)), 1e-6),
                ("closed-form metric inverse", _rel(G @ metric_inverse_apply(W, Y), Y), 1e-10),
            ]
            rows.extend((name, metric, rho, err, tol) for name, err, tol in checks)
    return rows


def _cmd_verify(args) -> int:
    seed = _env_seed()
    seed = args.seed if seed is None else seed
    rows = verify_rows(seed, tuple(args.metric or ("g1", "g2")), tuple(args.rho or (1.0,)))
    ok = True
    print(f"{'check':38s} {'metric':6s} {'rho':>4s} {'error':>10s} {'tol':>8s}  result")
    for name, metric, rho, err, tol in rows:
        passed = err < tol
        ok &= passed
        rho_s = "-" if rho != rho else f"{rho:g}"
        print(f"{name:38s} {metric:6s} {rho_s:>4s} {err:10.2e} {tol:8.0e}  {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "plot": _cmd_plot, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"ist-opt: error: {e}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
