"""Projections of exact solutions, discrete norms, errors and rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import DofLayout, SaddleSystem
from .fields import Polynomial3, VectorPoly
from .mesh import Mesh
from .polyspace import elem_quadrature, face_quadrature
from .weak_ops import (LocalOps, project_onto_element,
                       project_scalar_onto_element)


@dataclass
class ErrorRecord:
    level: int
    h: float
    ndof: int
    l2_error: float
    energy_error: float
    p_norm: float
    aux_norm_1: float | None = None


def project_exact(u: VectorPoly, p: Polynomial3 | None, system: SaddleSystem,
                  data_exactness: int | None = None) -> np.ndarray:
    """Full DOF vector of {Q0 u, Qb u, Qn(curl u)} and {Q0 p, Qb p}.

    Shared face blocks are single-valued by construction (same frame from
    both sides), so per-element scatter just overwrites them.
    """
    mesh, lay = system.mesh, system.layout
    if data_exactness is None:
        data_exactness = max(u.degree + system.k, 2 * system.k) + 2
    x = np.zeros(lay.ndof)
    for eid, T in enumerate(mesh.elements):
        lv = project_onto_element(mesh, T, system.k, u, data_exactness)
        lo = system.ops[eid].layout
        x[lay.u0_slice(eid)] = lv[:3 * lo.n3]
        for i, fid in enumerate(T.faces):
            x[lay.ub_slice(fid)] = lv[lo.ub(i)]
            x[lay.un_slice(fid)] = lv[lo.un(i)]
        if p is not None:
            lp = project_scalar_onto_element(mesh, T, system.k, p,
                                             data_exactness)
            x[lay.p0_slice(eid)] = lp[:lo.n3]
            for i, fid in enumerate(T.faces):
                x[lay.pb_slice(fid)] = lp[lo.pb(i)]
    return x


def energy_norm(v_full: np.ndarray, system: SaddleSystem) -> float:
    """|||v||| = (sum_T ||curlcurl_w v||_T^2 + s1(v, v))^(1/2)."""
    return math.sqrt(max(system.velocity_energy(v_full), 0.0))


def aux_norm_1(v_full: np.ndarray, system: SaddleSystem) -> float:
    """|||v||| plus elementwise divergence and normal-jump contributions."""
    mesh, lay, k = system.mesh, system.layout, system.k
    from .polyspace import elem_basis
    div2 = 0.0
    for eid, T in enumerate(mesh.elements):
        rule = elem_quadrature(T, mesh, 2 * k)
        g = elem_basis(T, k).grad(rule.points)   # (n3, 3, nq)
        c = v_full[lay.u0_slice(eid)].reshape(3, lay.n3)
        divv = np.einsum("ci,icq->q", c, g)
        div2 += np.dot(rule.weights, divv ** 2)
    jump2 = 0.0
    for f in mesh.faces:
        if f.is_boundary:
            continue
        rule = face_quadrature(f, mesh, 2 * k)
        vals = []
        from .polyspace import elem_basis
        for eid in f.neighbors:
            c = v_full[lay.u0_slice(eid)].reshape(3, lay.n3)
            # cached ops hold the class representative's centroid; evaluate
            # in this element's own centered basis
            ve = elem_basis(mesh.elements[eid], k).eval(rule.points)
            vals.append(np.einsum("ci,iq->cq", c, ve))
        jmp = np.einsum("c,cq->q", f.normal, vals[0] - vals[1])
        h_T = mesh.elements[f.neighbors[0]].diameter
        jump2 += np.dot(rule.weights, jmp ** 2) / h_T
    return energy_norm(v_full, system) + math.sqrt(div2) + math.sqrt(jump2)


def l2_errors(solution: np.ndarray, projected: np.ndarray,
              system: SaddleSystem) -> tuple[float, float]:
    """(||Q0 u - u0||_Omega, ||p0||_Omega)."""
    lay = system.layout
    err2 = 0.0
    p2 = 0.0
    for eid in range(len(system.mesh.elements)):
        M = system.ops[eid].mass_k
        d = (projected[lay.u0_slice(eid)]
             - solution[lay.u0_slice(eid)]).reshape(3, lay.n3)
        err2 += np.einsum("ci,ij,cj->", d, M, d)
        p0 = solution[lay.p0_slice(eid)]
        p2 += p0 @ M @ p0
    return math.sqrt(max(err2, 0.0)), math.sqrt(max(p2, 0.0))


def convergence_rates(errors: list[float]) -> list[float | None]:
    """log2 ratios under exact h-halving; first entry 0.0, undefined -> None."""
    rates: list[float | None] = []
    for i, e in enumerate(errors):
        if i == 0:
            rates.append(0.0)
        elif errors[i - 1] > 0.0 and e > 0.0:
            rates.append(math.log2(errors[i - 1] / e))
        else:
            rates.append(None)
    return rates
