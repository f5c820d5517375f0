"""Manufactured-solution convergence studies and table rendering."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import analysis
from .assembly import (assemble_system, augmented_normal_blocks,
                       impose_boundary, normal_penalty_matrix,
                       substructure_partition)
from .fields import Polynomial3, VectorPoly
from .mesh import generate_hex_mesh, generate_tet_mesh
from .solver import solve_saddle, solve_substructured

# Safety valve for desk-scale memory; refuse levels whose direct solve
# cannot plausibly fit.
MAX_DOFS = 350_000

# Above this many free unknowns a monolithic factorization outgrows desk
# memory, so the solve switches to octant substructuring (with the
# normal-trace stabilizer kept in its uncondensed, element-local form).
SUBSTRUCTURE_MIN_FREE = 30_000


@dataclass
class Problem:
    """Exact solution plus the derived data of the boundary value problem."""
    u: VectorPoly
    p: Polynomial3
    f_poly: VectorPoly          # (curl)^4 u, exact polynomial

    def f(self, pts):
        return self.f_poly.eval(pts)

    def g1(self, pts, normal):
        return np.cross(self.u.eval(pts), normal)

    def g2(self, pts, normal):
        return np.cross(self.u.curl().eval(pts), normal)


def manufactured_problem() -> Problem:
    """The degree-6 divergence-free benchmark solution on the unit cube.

    u = (-2 x^2 y^2 z, 2 x^2 y^3 z, -x y^2 z^2 (3x - 2)); the right-hand
    side below is its exact fourth curl (regenerate with
    scripts/derive_manufactured_rhs.py).
    """
    u = VectorPoly(
        Polynomial3({(2, 2, 1): -2.0}),
        Polynomial3({(2, 3, 1): 2.0}),
        Polynomial3({(2, 2, 2): -3.0, (1, 2, 2): 2.0}),
    )
    f = VectorPoly(
        Polynomial3({(0, 0, 1): -16.0}),
        Polynomial3({(0, 1, 1): 48.0}),
        Polynomial3({(2, 0, 0): -24.0, (1, 0, 0): 16.0,
                     (0, 2, 0): -24.0, (0, 0, 2): -24.0}),
    )
    return Problem(u, Polynomial3.zero(), f)


def polynomial_problem(u: VectorPoly) -> Problem:
    """Problem with a user-chosen exact polynomial solution (patch tests)."""
    f = u.curl().curl().curl().curl()
    return Problem(u, Polynomial3.zero(), f)


@dataclass
class StudyConfig:
    k: int
    family: str = "hex"              # hex | tet
    levels: tuple[int, ...] = (1, 2, 3)
    tol: float = 1e-10
    solver: str = "direct"
    fmt: str = "plain"               # plain | csv | latex
    workers: int = 1
    compute_aux_norm: bool = False
    dump_mesh: str | None = None
    dump_matrix: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be ascending")
        if self.family not in ("hex", "tet"):
            raise ValueError(f"unknown mesh family {self.family!r}")


@dataclass
class ConvergenceReport:
    config: StudyConfig
    records: list[analysis.ErrorRecord]
    rates_l2: list[float | None] = field(default_factory=list)
    rates_energy: list[float | None] = field(default_factory=list)
    rates_p: list[float | None] = field(default_factory=list)
    timings: list[float] = field(default_factory=list)

    def finalize(self):
        self.rates_l2 = analysis.convergence_rates(
            [r.l2_error for r in self.records])
        self.rates_energy = analysis.convergence_rates(
            [r.energy_error for r in self.records])
        self.rates_p = analysis.convergence_rates(
            [r.p_norm for r in self.records])


def _generate(family: str, level: int):
    return generate_hex_mesh(level) if family == "hex" \
        else generate_tet_mesh(level)


def estimate_dofs(family: str, level: int, k: int) -> int:
    from .polyspace import dim_poly2, dim_poly3
    n = 2 ** (level - 1)
    n3, nb, nn = dim_poly3(k), dim_poly2(k), dim_poly2(k - 1)
    if family == "hex":
        ne, nf = n ** 3, 3 * n ** 2 * (n + 1)
    else:
        ne, nf = 6 * n ** 3, 12 * n ** 3 + 6 * n ** 2
    return ne * 4 * n3 + nf * (2 * nb + 2 * nn + nb)


def solve_level(problem: Problem, family: str, level: int, k: int,
                tol: float = 1e-10, solver: str = "direct",
                workers: int = 1, compute_aux_norm: bool = False,
                dump_mesh: str | None = None,
                dump_matrix: str | None = None) -> analysis.ErrorRecord:
    """Generate, assemble, solve and measure errors for one level."""
    est = estimate_dofs(family, level, k)
    if est > MAX_DOFS:
        raise MemoryError(
            f"refusing {family} level {level} with k={k}: about {est} DOFs "
            f"exceed the configured limit of {MAX_DOFS}")
    mesh = _generate(family, level)
    if dump_mesh:
        from .mesh import dump_mesh as _dump
        _dump(mesh, dump_mesh)
    system = assemble_system(mesh, k, f=problem.f, workers=workers)
    K_free, F_free, x_full = impose_boundary(system, problem.g1, problem.g2)
    if dump_matrix:
        from .assembly import dump_matrix_coo
        dump_matrix_coo(K_free, dump_matrix)
    lay = system.layout
    nt = system.stab.normal_trace
    parts = None
    if solver == "direct" and lay.n_free >= SUBSTRUCTURE_MIN_FREE:
        if nt:
            N, C, D, aux = augmented_normal_blocks(system)
            parts = substructure_partition(system, aux)
        else:
            parts = substructure_partition(system)
    free = np.flatnonzero(lay.free)
    if parts is not None:
        if nt:
            K_solve = sp.bmat(
                [[K_free + N[free].tocsc()[:, free], C[free]],
                 [C[free].T, D]], format="csr")
            F_solve = np.concatenate([F_free, np.zeros(aux.naux)])
            del N, C, D
        else:
            K_solve, F_solve = K_free.tocsr(), F_free
        del K_free
        system.K = None  # reclaim assembly memory before factorization
        report = solve_substructured(K_solve, F_solve, parts, tol=tol)
        x_full[lay.free] = report.x[:lay.n_free]
    else:
        if nt:
            S1n = normal_penalty_matrix(system)
            K_free = (K_free + S1n[free].tocsc()[:, free]).tocsc()
            del S1n
        report = solve_saddle(K_free, F_free, tol=tol, method=solver)
        x_full[lay.free] = report.x
    projected = analysis.project_exact(problem.u, problem.p, system)
    err_vec = projected - x_full
    l2, p_norm = analysis.l2_errors(x_full, projected, system)
    energy = analysis.energy_norm(err_vec, system)
    aux = analysis.aux_norm_1(err_vec, system) if compute_aux_norm else None
    return analysis.ErrorRecord(level, mesh.h, system.layout.n_free,
                                l2, energy, p_norm, aux)


def run_study(config: StudyConfig,
              problem: Problem | None = None) -> ConvergenceReport:
    problem = problem or manufactured_problem()
    report = ConvergenceReport(config, [])
    for level in config.levels:
        t0 = time.perf_counter()
        rec = solve_level(problem, config.family, level, config.k,
                          tol=config.tol, solver=config.solver,
                          workers=config.workers,
                          compute_aux_norm=config.compute_aux_norm,
                          dump_mesh=config.dump_mesh,
                          dump_matrix=config.dump_matrix)
        report.records.append(rec)
        report.timings.append(time.perf_counter() - t0)
    report.finalize()
    return report


def _fortran_sci(v: float) -> str:
    """0.XXXXE±NN style with 4 significant digits."""
    if v == 0.0:
        return "0.0000E+00"
    s = f"{abs(v):.3E}"          # d.dddE±ee
    mant, exp = s.split("E")
    e = int(exp) + 1
    digits = mant.replace(".", "")
    sign = "-" if v < 0 else ""
    return f"{sign}0.{digits}E{e:+03d}"


def _rate_str(r: float | None) -> str:
    return "  -" if r is None else f"{r:.1f}"


def render_table(report: ConvergenceReport, fmt: str | None = None) -> str:
    fmt = fmt or report.config.fmt
    rows = list(zip(report.records, report.rates_l2, report.rates_energy,
                    report.rates_p))
    if fmt == "csv":
        lines = ["level,h,ndof,l2_error,l2_rate,energy_error,energy_rate,"
                 "p_norm,p_rate"]
        for rec, rl, re_, rp in rows:
            def rr(r):
                return "" if r is None else repr(r)
            lines.append(f"{rec.level},{float(rec.h)!r},{rec.ndof},"
                         f"{float(rec.l2_error)!r},{rr(rl)},"
                         f"{float(rec.energy_error)!r},{rr(re_)},"
                         f"{float(rec.p_norm)!r},{rr(rp)}")
        return "\n".join(lines) + "\n"
    if fmt == "latex":
        lines = [r"\begin{tabular}{c|cc|cc|cc}", r"\hline",
                 r"level & L2 error & rate & energy error & rate & "
                 r"pressure norm & rate \\", r"\hline"]
        for rec, rl, re_, rp in rows:
            lines.append(
                f" {rec.level}&  {_fortran_sci(rec.l2_error)}&  {_rate_str(rl)}&"
                f"  {_fortran_sci(rec.energy_error)}&  {_rate_str(re_)}&"
                f"  {_fortran_sci(rec.p_norm)}&  {_rate_str(rp)} \\\\")
        lines += [r"\hline", r"\end{tabular}"]
        return "\n".join(lines) + "\n"
    if fmt == "plain":
        cfg = report.config
        head = (f"k={cfg.k} family={cfg.family} "
                f"(level | L2 err rate | energy err rate | p norm rate)")
        lines = [head]
        for rec, rl, re_, rp in rows:
            lines.append(f" {rec.level}   {_fortran_sci(rec.l2_error)}  "
                         f"{_rate_str(rl)}   {_fortran_sci(rec.energy_error)}  "
                         f"{_rate_str(re_)}   {_fortran_sci(rec.p_norm)}  "
                         f"{_rate_str(rp)}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def parse_csv_table(text: str) -> list[dict]:
    """Round-trip reader for the csv rendering."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for key, v in zip(header, vals):
            if key in ("level", "ndof"):
                row[key] = int(v)
            else:
                row[key] = float(v) if v else None
        out.append(row)
    return out
