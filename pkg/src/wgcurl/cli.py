"""Command line interface.

Subcommands:
  study   convergence study over a level range, prints an error/rate table
  solve   single level with error printout
  verify  run the operator identity, commutativity and patch-test suites

A line-based key=value config file (--config) overrides the flags.
Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .driver import (StudyConfig, manufactured_problem, polynomial_problem,
                     render_table, run_study, solve_level)
from .solver import SolverError


def _parse_levels(spec: str) -> tuple[int, ...]:
    if ".." in spec:
        a, b = spec.split("..")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(s) for s in spec.split(","))


def _load_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fp:
        for ln in fp:
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise ValueError(f"bad config line: {ln!r}")
            key, val = ln.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _apply_config(args: argparse.Namespace, cfg: dict[str, str]) -> None:
    casts = {"k": int, "mesh": str, "levels": str, "format": str,
             "tol": float, "solver": str, "workers": int, "level": int,
             "dump_mesh": str, "dump_matrix": str}
    for key, val in cfg.items():
        if key not in casts:
            raise ValueError(f"unknown config key: {key}")
        attr = key.replace("-", "_")
        if hasattr(args, attr):
            setattr(args, attr, casts[key](val))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=2, help="polynomial degree k >= 1")
    p.add_argument("--mesh", choices=("hex", "tet"), default="hex")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--solver", choices=("direct", "krylov"), default="direct")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-mesh", dest="dump_mesh", default=None)
    p.add_argument("--dump-matrix", dest="dump_matrix", default=None)
    p.add_argument("--config", default=None,
                   help="key=value file overriding the flags")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgcurl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("study", help="convergence study over levels")
    _add_common(ps)
    ps.add_argument("--levels", default="1..3", help="a..b or comma list")
    ps.add_argument("--format", choices=("plain", "csv", "latex"),
                    default="plain")

    pv = sub.add_parser("solve", help="solve a single level")
    _add_common(pv)
    pv.add_argument("--level", type=int, default=2)

    pf = sub.add_parser("verify", help="operator/commutativity/patch suites")
    _add_common(pf)

    return ap


def _cmd_study(args) -> int:
    cfg = StudyConfig(k=args.k, family=args.mesh,
                      levels=_parse_levels(args.levels), tol=args.tol,
                      solver=args.solver, fmt=args.format,
                      workers=args.workers, dump_mesh=args.dump_mesh,
                      dump_matrix=args.dump_matrix)
    report = run_study(cfg)
    sys.stdout.write(render_table(report))
    return 0


def _cmd_solve(args) -> int:
    rec = solve_level(manufactured_problem(), args.mesh, args.level, args.k,
                      tol=args.tol, solver=args.solver, workers=args.workers,
                      compute_aux_norm=True, dump_mesh=args.dump_mesh,
                      dump_matrix=args.dump_matrix)
    print(f"level={rec.level} h={rec.h:.6g} free_dofs={rec.ndof}")
    print(f"l2_error={rec.l2_error:.6e}")
    print(f"energy_error={rec.energy_error:.6e}")
    print(f"p_norm={rec.p_norm:.6e}")
    print(f"aux_norm_1={rec.aux_norm_1:.6e}")
    return 0


def _cmd_verify(args) -> int:
    from .fields import Polynomial3, VectorPoly, random_vector_poly
    from .mesh import generate_hex_mesh, generate_tet_mesh, validate
    from .weak_ops import check_commutativity

    ok = True
    for gen, name in ((generate_hex_mesh, "hex"), (generate_tet_mesh, "tet")):
        mesh = gen(2)
        bad = validate(mesh)
        print(f"mesh {name} level 2 invariants: "
              f"{'ok' if not bad else bad}")
        ok &= not bad

        rng = np.random.default_rng(7)
        worst = 0.0
        for T in mesh.elements[:4]:
            for _ in range(5):
                w = random_vector_poly(args.k + 1, rng)
                r1, r2 = check_commutativity(mesh, T, args.k, w)
                worst = max(worst, r1, r2)
        print(f"commutativity {name} (k={args.k}): max residual {worst:.2e}")
        ok &= worst <= 1e-10

    u = VectorPoly(Polynomial3({(0, 2, 0): 1.0}), Polynomial3({(0, 0, 2): 1.0}),
                   Polynomial3({(2, 0, 0): 1.0}))
    rec = solve_level(polynomial_problem(u), "hex", 2, max(args.k, 2),
                      tol=args.tol, solver=args.solver)
    print(f"patch test hex level 2 (k={max(args.k, 2)}): "
          f"l2={rec.l2_error:.2e} energy={rec.energy_error:.2e} "
          f"p={rec.p_norm:.2e}")
    ok &= max(rec.l2_error, rec.energy_error, rec.p_norm) <= 1e-8
    print("verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.config:
            _apply_config(args, _load_config(args.config))
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "study":
            return _cmd_study(args)
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_verify(args)
    except (ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
