"""Command-line entry point: solve, verify and oracle subcommands.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification-domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .artifact import (
    VerificationDomainError,
    dumps,
    load_artifact,
    solve_config,
    summary_rows,
    verify_document,
    write_atomic,
    write_csv,
)
from .config import ConfigError, SolveConfig
from .densities import DensityDomainError
from .geometry import GeometryError, completeness_trend
from .oracles import (
    HeisenbergModel,
    canonical_example,
    heisenberg_det,
    heisenberg_profile,
    su2_arrays,
    su2_eigenvalues,
    su2_spectral,
)
from .geometry import metric_eigenvalues
from .ot_solver import TransportError
from .rootsys import RootSystemError, load_root_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DOMAIN = 4


def _cmd_solve(args) -> int:
    cfg = SolveConfig.load(args.config)
    doc = solve_config(cfg)
    write_atomic(args.out, dumps(doc))
    print(f"{'k':>8} {'R_k':>14} {'max_rel_residual':>18} {'sup_diff_prev':>14}")
    for k, R, res, sup in summary_rows(doc):
        sup_s = "-" if math.isnan(sup) else f"{sup:.6e}"
        print(f"{k:8.4g} {R:14.8f} {res:18.3e} {sup_s:>14}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        doc = load_artifact(args.artifact)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    result = verify_document(doc, args.samples)
    write_csv(args.out, result.header, result.rows)
    for key in sorted(result.summary):
        print(f"{key}: {result.summary[key]}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _oracle_su2(args):
    t = np.linspace(0.0, args.tmax, args.samples)
    u, f, kp, kpp = su2_arrays(t)
    rs = load_root_system("A1")
    header = ["t", "u", "f", "Kp", "Kpp", "defect", "lambda_0", "lambda_plus", "lambda_minus"]
    rows = []
    for i, ti in enumerate(t):
        defect = metric_eigenvalues(rs, su2_spectral(rs, ti)).ricci_defect
        lam = su2_eigenvalues(ti) if ti > 0 else (kpp[i], f[i], f[i])
        rows.append([ti, u[i], f[i], kp[i], kpp[i], defect, *lam])
    trend = completeness_trend(lambda s: su2_arrays(s)[3], args.tmax)
    summary = {"hessian_rate": trend.hessian_rate, "length_exponent": trend.length_exponent, "verdict": trend.verdict}
    return header, rows, summary


def _oracle_heisenberg(args):
    t = np.linspace(-0.95, 0.95, args.samples)
    model = HeisenbergModel(args.n, heisenberg_profile(args.f, args.n, args.seed))
    header = ["t", "det_real", "det_imag", "formula", "abs_diff"]
    rows = []
    for ti in t:
        num, formula, diff = heisenberg_det(model, ti)
        rows.append([ti, num.real, num.imag, formula, diff])
    return header, rows, {"max_abs_diff": max(r[-1] for r in rows), "n": args.n, "profile": args.f}


def _oracle_canonical(args):
    rs = load_root_system(args.group)
    rng = np.random.default_rng(args.seed)
    x = rng.uniform(-args.tmax, args.tmax, size=(args.samples, rs.rank))
    n = rs.rank
    cartan = [f"cartan_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    header = [f"x{i + 1}" for i in range(n)] + cartan + ["defect", "expected"]
    rows = []
    for xi in x:
        rep = metric_eigenvalues(rs, canonical_example(rs, xi))
        a = rs.root_values(xi)
        expected = float(np.prod((a / np.sinh(a)) ** 2))
        rows.append([*xi, *np.asarray(rep.horizontal_cartan).ravel(), rep.ricci_defect, expected])
    diff = max(abs(r[-2] - r[-1]) / r[-1] for r in rows)
    cart = max(float(np.max(np.abs(np.reshape(r[n : n + n * n], (n, n)) - np.eye(n)))) for r in rows)
    return header, rows, {"cartan_identity_error": cart, "group": rs.name, "max_rel_diff": diff}


def _cmd_oracle(args) -> int:
    if args.samples <= 0:
        raise ConfigError("samples must be positive")
    builders = {"su2": _oracle_su2, "heisenberg": _oracle_heisenberg, "canonical": _oracle_canonical}
    try:
        header, rows, summary = builders[args.which](args)
    except (RootSystemError,) as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise VerificationDomainError(str(exc)) from None
    write_csv(args.out, header, rows)
    print(json.dumps(summary, sort_keys=True))
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invariant-kahler", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the transport sequence described by a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="artifact JSON path")
    s.set_defaults(func=_cmd_solve)

    v = sub.add_parser("verify", help="sample curvature and positivity diagnostics from an artifact")
    v.add_argument("--artifact", required=True)
    v.add_argument("--samples", type=int, default=64)
    v.add_argument("--out", required=True, help="CSV path")
    v.set_defaults(func=_cmd_verify)

    o = sub.add_parser("oracle", help="tabulate a closed-form reference metric")
    o.add_argument("which", choices=["su2", "heisenberg", "canonical"])
    o.add_argument("--tmax", type=float, default=3.0)
    o.add_argument("--samples", type=int, default=50)
    o.add_argument("--n", type=int, default=1, help="Heisenberg dimension parameter")
    o.add_argument("--f", default="ricci-flat", choices=["constant", "ricci-flat", "polynomial"])
    o.add_argument("--group", default="A2")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True, help="CSV path")
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (VerificationDomainError, DensityDomainError, GeometryError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
