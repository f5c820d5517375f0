"""Element-local weak differential operators and bilinear form blocks.

Everything here is dense per-element linear algebra: the discrete weak
gradient and weak curl-curl are recovered from their defining integral
identities by a single vector mass-matrix solve, and the stabilizer and
coupling blocks are built from tangential face traces in the shared face
frames.  All integrands are polynomial and integrated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .mesh import Element, Mesh, face_frame
from .polyspace import (ScalarBasis2D, ScalarBasis3D, dim_poly2, dim_poly3,
                        elem_basis, elem_quadrature, face_basis,
                        face_quadrature, mass_matrix)

# Stabilizer length scale: the mesh size h in the face weights is the grid
# edge length, which on these uniform partitions is diameter / sqrt(3).
DEFAULT_SCALE = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class LocalLayout:
    """Offsets of the per-element coefficient blocks.

    Velocity: [u0 (3*n3)] then per face [ub_t1, ub_t2, un_t1, un_t2].
    Pressure: [p0 (n3)] then per face [pb].
    """
    k: int
    nfaces: int

    @property
    def n3(self) -> int:
        return dim_poly3(self.k)

    @property
    def nb(self) -> int:
        return dim_poly2(self.k)

    @property
    def nn(self) -> int:
        return dim_poly2(self.k - 1)

    @property
    def nvel(self) -> int:
        return 3 * self.n3 + self.nfaces * 2 * (self.nb + self.nn)

    @property
    def npre(self) -> int:
        return self.n3 + self.nfaces * self.nb

    def ub(self, i: int) -> slice:
        start = 3 * self.n3 + i * 2 * (self.nb + self.nn)
        return slice(start, start + 2 * self.nb)

    def un(self, i: int) -> slice:
        start = 3 * self.n3 + i * 2 * (self.nb + self.nn) + 2 * self.nb
        return slice(start, start + 2 * self.nn)

    def pb(self, i: int) -> slice:
        start = self.n3 + i * self.nb
        return slice(start, start + self.nb)


def vector_curl_matrix(basis: ScalarBasis3D) -> np.ndarray:
    """Coefficient map of the curl on [span(basis)]^3, block layout [x;y;z]."""
    Dx, Dy, Dz = (basis.diff_matrix(ax) for ax in range(3))
    Z = np.zeros_like(Dx)
    return np.block([[Z, -Dz, Dy],
                     [Dz, Z, -Dx],
                     [-Dy, Dx, Z]])


def _vec_values(coeffs: np.ndarray, scalar_vals: np.ndarray) -> np.ndarray:
    """Values of vector polynomials: (3N, m) coeffs -> (3, m, nq)."""
    N = scalar_vals.shape[0]
    m = coeffs.shape[1]
    return np.einsum("cim,iq->cmq", coeffs.reshape(3, N, m), scalar_vals)


class LocalOps:
    """All element-local matrices for one element shape class.

    Translation invariant: depends only on the element geometry relative
    to its centroid, the face frames and the outward-orientation signs.
    """

    def __init__(self, mesh: Mesh, element: Element, k: int,
                 stab_exponents: tuple[float, float, float] = (-3.0, -1.0, -2.0),
                 stab_scale: float = DEFAULT_SCALE,
                 stab_prefactors: tuple[float, float, float] = (1.0, 1.0, 1.0),
                 curl_degree: int | None = None,
                 grad_degree: int | None = None):
        if k < 1:
            raise ValueError(f"polynomial degree k must be >= 1, got {k}")
        if curl_degree is None:
            curl_degree = k - 1
        if grad_degree is None:
            grad_degree = k
        if curl_degree > k - 1:
            raise ValueError(
                f"curl_degree must be <= k - 1, got {curl_degree} with k={k}")
        self.k = k
        self.curl_degree = curl_degree
        self.grad_degree = grad_degree
        self.stab_exponents = stab_exponents
        self.stab_scale = stab_scale
        self.h_T = element.diameter
        nfaces = len(element.faces)
        self.layout = lo = LocalLayout(k, nfaces)
        exact = 2 * k + 2

        bk = elem_basis(element, k)
        br = elem_basis(element, curl_degree)
        self.basis_k = bk
        self.curl_basis = br
        n3, n2 = bk.dim, br.dim

        vrule = elem_quadrature(element, mesh, exact)
        w = vrule.weights
        vals_k = bk.eval(vrule.points)
        self.mass_k = np.einsum("iq,jq,q->ij", vals_k, vals_k, w)
        self.mass_k = 0.5 * (self.mass_k + self.mass_k.T)

        self.faces = []
        for i, (fid, sign) in enumerate(zip(element.faces, element.face_signs)):
            face = mesh.faces[fid]
            fb = face_basis(face, k)
            fn = face_basis(face, k - 1)
            frule = face_quadrature(face, mesh, exact)
            self.faces.append({
                "fid": fid, "sign": sign, "frame": (fb.t1, fb.t2, fb.normal),
                "basis_b": fb, "basis_n": fn, "rule": frule,
                "chi_b": fb.eval(frule.points), "chi_n": fn.eval(frule.points),
                "vals_k": bk.eval(frule.points),
            })

        # ---- weak curl-curl: M2vec * C = R ------------------------------
        R = np.zeros((3 * n2, lo.nvel))
        if n2 > 0:
            vals_r = br.eval(vrule.points)
            M2 = np.einsum("iq,jq,q->ij", vals_r, vals_r, w)
            M2 = 0.5 * (M2 + M2.T)
            curl1 = vector_curl_matrix(br)
            curl2 = curl1 @ curl1
            cc_vals = _vec_values(curl2, vals_r)       # (3, 3n2, nq)
            # (v0, (curl)^2 q_j)_T
            R[:, :3 * n3] = np.einsum("q,iq,cjq->jci", w, vals_k,
                                      cc_vals).reshape(3 * n2, 3 * n3)
            for i, fd in enumerate(self.faces):
                s, (t1, t2, _) = fd["sign"], fd["frame"]
                wf = fd["rule"].weights
                vk2f = br.eval(fd["rule"].points)
                qv = _vec_values(np.eye(3 * n2), vk2f)      # q_j values
                cv = _vec_values(curl1, vk2f)               # curl q_j values
                for tan, colshift, sgn in ((t2, 0, +1.0), (t1, 1, -1.0)):
                    # -<v_b x n, curl q> and -<v_n x n, q>, n outward
                    tdotc = np.einsum("c,cjq->jq", tan, cv)
                    tdotq = np.einsum("c,cjq->jq", tan, qv)
                    ub = fd["chi_b"]
                    un = fd["chi_n"]
                    blk_b = sgn * s * np.einsum("q,mq,jq->jm", wf, ub, tdotc)
                    blk_n = sgn * s * np.einsum("q,mq,jq->jm", wf, un, tdotq)
                    sl_b = lo.ub(i)
                    sl_n = lo.un(i)
                    nb, nn = lo.nb, lo.nn
                    R[:, sl_b.start + colshift * nb:
                         sl_b.start + (colshift + 1) * nb] += blk_b
                    R[:, sl_n.start + colshift * nn:
                         sl_n.start + (colshift + 1) * nn] += blk_n
            ch2 = cho_factor(M2)
            C = np.empty_like(R)
            for c in range(3):
                C[c * n2:(c + 1) * n2] = cho_solve(ch2, R[c * n2:(c + 1) * n2])
            self.curl_mass = M2
        else:
            C = R
            self.curl_mass = np.zeros((0, 0))
        self.curlcurl = C
        self.a_loc = R.T @ C
        self.a_loc = 0.5 * (self.a_loc + self.a_loc.T)

        # ---- weak gradient: Mg * G = Rg ---------------------------------
        bg = elem_basis(element, grad_degree)
        self.grad_basis = bg
        ng = bg.dim
        vals_g = bg.eval(vrule.points)
        grads_g = bg.grad(vrule.points)
        Mg = np.einsum("iq,jq,q->ij", vals_g, vals_g, w)
        Mg = 0.5 * (Mg + Mg.T)
        self.grad_mass = Mg
        Rg = np.zeros((3 * ng, lo.npre))
        # -(p0, div psi)_T
        for c in range(3):
            Rg[c * ng:(c + 1) * ng, :n3] = -np.einsum(
                "q,jq,iq->ij", w, vals_k, grads_g[:, c, :])
        for i, fd in enumerate(self.faces):
            s, (_, _, nf) = fd["sign"], fd["frame"]
            wf = fd["rule"].weights
            vgf = bg.eval(fd["rule"].points)
            blk = np.einsum("q,mq,iq->im", wf, fd["chi_b"], vgf)
            for c in range(3):
                Rg[c * ng:(c + 1) * ng, lo.pb(i)] += s * nf[c] * blk
        chg = cho_factor(Mg)
        G = np.empty_like(Rg)
        for c in range(3):
            G[c * ng:(c + 1) * ng] = cho_solve(chg, Rg[c * ng:(c + 1) * ng])
        self.grad = G
        if grad_degree == k:
            self.b_loc = Rg  # rows are exactly the u0 coefficient block
        else:
            # (u0, grad_w q) with grad_w q in the lower-degree space needs
            # the cross mass matrix between the two interior bases
            Mkg = np.einsum("iq,jq,q->ij", vals_k, vals_g, w)
            B = np.empty((3 * n3, lo.npre))
            for c in range(3):
                B[c * n3:(c + 1) * n3] = Mkg @ G[c * ng:(c + 1) * ng]
            self.b_loc = B

        # ---- stabilizers -------------------------------------------------
        S1 = np.zeros((lo.nvel, lo.nvel))
        S2 = np.zeros((lo.npre, lo.npre))
        e1, e2, e3 = stab_exponents
        c1, c2, c3 = stab_prefactors
        curl_k = vector_curl_matrix(bk)
        for i, fd in enumerate(self.faces):
            hs = self.h_T * stab_scale
            t1, t2, _ = fd["frame"]
            wf = fd["rule"].weights
            nqf = len(wf)
            vkf = fd["vals_k"]
            cu_vals = _vec_values(curl_k, vkf)   # curl of u0 basis at face pts
            u0_vals = _vec_values(np.eye(3 * n3), vkf)
            for weight, vol_vals, chi, sl in (
                    (c1 * hs ** e1, u0_vals, fd["chi_b"], lo.ub(i)),
                    (c2 * hs ** e2, cu_vals, fd["chi_n"], lo.un(i))):
                nface = chi.shape[0]
                E = np.zeros((2 * nqf, lo.nvel))
                for a, tan in enumerate((t1, t2)):
                    rows = slice(a * nqf, (a + 1) * nqf)
                    E[rows, :3 * n3] = np.einsum(
                        "c,cjq->qj", tan, vol_vals)
                    E[rows, sl.start + a * nface:
                            sl.start + (a + 1) * nface] = -chi.T
                S1 += weight * (E.T * np.concatenate([wf, wf])) @ E
            Ep = np.zeros((nqf, lo.npre))
            Ep[:, :n3] = vkf.T
            Ep[:, lo.pb(i)] = -fd["chi_b"].T
            S2 += c3 * hs ** e3 * (Ep.T * wf) @ Ep
        self.s1_loc = 0.5 * (S1 + S1.T)
        self.s2_loc = 0.5 * (S2 + S2.T)


def weak_gradient_local(mesh: Mesh, element: Element, k: int) -> np.ndarray:
    """Matrix taking local {p0, pb} coefficients to grad_w p in [P_k(T)]^3."""
    return LocalOps(mesh, element, k).grad


def weak_curlcurl_local(mesh: Mesh, element: Element, k: int,
                        curl_degree: int | None = None) -> np.ndarray:
    """Matrix taking local {v0, vb, vn} coefficients to the weak curl-curl
    in [P_r(T)]^3 with r = curl_degree (default k - 1); zero-row matrix
    when r < 0."""
    return LocalOps(mesh, element, k, curl_degree=curl_degree).curlcurl


def _face_l2_project(face, mesh, degree, vec_vals_fn, data_exactness):
    """Tangential-frame L2 projection on one face: [t1 coeffs, t2 coeffs]."""
    fb = face_basis(face, degree)
    if fb.dim == 0:
        return np.zeros(0)
    frule = face_quadrature(face, mesh, max(data_exactness, 2 * max(degree, 0)))
    chi = fb.eval(frule.points)
    Mf = np.einsum("iq,jq,q->ij", chi, chi, frule.weights)
    chf = cho_factor(0.5 * (Mf + Mf.T))
    vals = vec_vals_fn(frule.points)
    out = np.empty(2 * fb.dim)
    for a, tan in enumerate((fb.t1, fb.t2)):
        rhs = chi @ (frule.weights * (vals @ tan))
        out[a * fb.dim:(a + 1) * fb.dim] = cho_solve(chf, rhs)
    return out


def project_onto_element(mesh: Mesh, element: Element, k: int,
                         field, data_exactness: int) -> np.ndarray:
    """Local velocity coefficients of the elementwise L2 projection
    {Q0 w, Qb w, Qn(curl w)} of a VectorPoly (tangential face storage)."""
    lo = LocalLayout(k, len(element.faces))
    out = np.zeros(lo.nvel)
    bk = elem_basis(element, k)
    vrule = elem_quadrature(element, mesh, max(data_exactness, 2 * k))
    vals_k = bk.eval(vrule.points)
    Mk = np.einsum("iq,jq,q->ij", vals_k, vals_k, vrule.weights)
    chk = cho_factor(0.5 * (Mk + Mk.T))
    fw = field.eval(vrule.points)    # (nq, 3)
    for c in range(3):
        rhs = vals_k @ (vrule.weights * fw[:, c])
        out[c * lo.n3:(c + 1) * lo.n3] = cho_solve(chk, rhs)
    curl_f = field.curl()
    for i, fid in enumerate(element.faces):
        face = mesh.faces[fid]
        out[lo.ub(i)] = _face_l2_project(face, mesh, k, field.eval,
                                         data_exactness)
        out[lo.un(i)] = _face_l2_project(face, mesh, k - 1, curl_f.eval,
                                         data_exactness)
    return out


def project_scalar_onto_element(mesh: Mesh, element: Element, k: int,
                                field, data_exactness: int) -> np.ndarray:
    """Local pressure coefficients {Q0 s, Qb s} of a Polynomial3."""
    lo = LocalLayout(k, len(element.faces))
    out = np.zeros(lo.npre)
    bk = elem_basis(element, k)
    vrule = elem_quadrature(element, mesh, max(data_exactness, 2 * k))
    vals_k = bk.eval(vrule.points)
    Mk = np.einsum("iq,jq,q->ij", vals_k, vals_k, vrule.weights)
    rhs = vals_k @ (vrule.weights * field.eval(vrule.points))
    out[:lo.n3] = cho_solve(cho_factor(0.5 * (Mk + Mk.T)), rhs)
    for i, fid in enumerate(element.faces):
        face = mesh.faces[fid]
        fb = face_basis(face, k)
        frule = face_quadrature(face, mesh, max(data_exactness, 2 * k))
        chi = fb.eval(frule.points)
        Mf = np.einsum("iq,jq,q->ij", chi, chi, frule.weights)
        rhs = chi @ (frule.weights * field.eval(frule.points))
        out[lo.pb(i)] = cho_solve(cho_factor(0.5 * (Mf + Mf.T)), rhs)
    return out


def project_poly_coeffs(mesh: Mesh, element: Element,
                        field, degree: int, data_exactness: int) -> np.ndarray:
    """Coefficients of the interior L2 projection of a VectorPoly onto
    [P_degree(T)]^3 in the element's scaled monomial basis."""
    basis = elem_basis(element, degree)
    if basis.dim == 0:
        return np.zeros(0)
    vrule = elem_quadrature(element, mesh, max(data_exactness, 2 * degree))
    vals = basis.eval(vrule.points)
    M = np.einsum("iq,jq,q->ij", vals, vals, vrule.weights)
    ch = cho_factor(0.5 * (M + M.T))
    fw = field.eval(vrule.points)
    out = np.empty(3 * basis.dim)
    for c in range(3):
        out[c * basis.dim:(c + 1) * basis.dim] = cho_solve(
            ch, vals @ (vrule.weights * fw[:, c]))
    return out


def check_commutativity(mesh: Mesh, element: Element, k: int, field,
                        ops: LocalOps | None = None) -> tuple[float, float]:
    """Relative residuals of the two projection/derivative commutations.

    Returns (curl-curl residual for the vector field, gradient residual for
    its first component used as a scalar sample).
    """
    ops = ops or LocalOps(mesh, element, k)
    data_exact = 2 * max(field.degree, k) + 2

    qh = project_onto_element(mesh, element, k, field, data_exact)
    lhs = ops.curlcurl @ qh
    curl2 = field.curl().curl()
    rhs = project_poly_coeffs(mesh, element, curl2, ops.curl_degree,
                              data_exact)
    M2 = ops.curl_mass
    n2 = ops.curl_basis.dim

    def vecnorm(v, M, n):
        if n == 0:
            return 0.0
        return np.sqrt(sum(v[c * n:(c + 1) * n] @ M @ v[c * n:(c + 1) * n]
                           for c in range(3)))

    denom = max(vecnorm(rhs, M2, n2), 1.0)
    res_cc = vecnorm(lhs - rhs, M2, n2) / denom

    from .fields import VectorPoly
    scal = field.comps[0]
    ph = project_scalar_onto_element(mesh, element, k, scal, data_exact)
    lhs_g = ops.grad @ ph
    grad = VectorPoly(scal.diff(0), scal.diff(1), scal.diff(2))
    rhs_g = project_poly_coeffs(mesh, element, grad, k, data_exact)
    n3 = ops.basis_k.dim
    denom_g = max(vecnorm(rhs_g, ops.mass_k, n3), 1.0)
    res_g = vecnorm(lhs_g - rhs_g, ops.mass_k, n3) / denom_g
    return res_cc, res_g


class _PolyTable:
    """Family of Polynomial3s evaluated through one shared monomial
    Vandermonde, so a batched point evaluation costs a single matmul."""

    def __init__(self, polys):
        exps = sorted({e for p in polys for e in p.terms}) or [(0, 0, 0)]
        self.exps = np.array(exps, dtype=np.int64)
        idx = {e: j for j, e in enumerate(exps)}
        self.C = np.zeros((len(polys), len(exps)))
        for i, p in enumerate(polys):
            for e, c in p.terms.items():
                self.C[i, idx[e]] = c

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        mono = (pts[:, :1] ** self.exps[:, 0]
                * pts[:, 1:2] ** self.exps[:, 1]
                * pts[:, 2:3] ** self.exps[:, 2])
        return self.C @ mono.T


def _vecnorm3(v: np.ndarray, M: np.ndarray, n: int) -> float:
    if n == 0:
        return 0.0
    return np.sqrt(sum(v[c * n:(c + 1) * n] @ M @ v[c * n:(c + 1) * n]
                       for c in range(3)))


def check_commutativity_batch(mesh: Mesh, k: int, fields,
                              ops_table=None) -> np.ndarray:
    """Worst-over-elements commutation residuals of several fields.

    Equivalent to running check_commutativity for every (element, field)
    pair and maximizing over elements, but the symbolic derivatives,
    quadrature geometry, and projection factorizations are computed once
    and shared, which matters when sweeping many random fields over a
    whole mesh.  Returns an (nfields, 2) array of (curl-curl residual,
    gradient residual) maxima.
    """
    nf = len(fields)
    polys = []
    # per field: [f (3), curl f (3), curl curl f (3), grad f_x (3)]
    for f in fields:
        cf = f.curl()
        polys.extend(f.comps)
        polys.extend(cf.comps)
        polys.extend(cf.curl().comps)
        polys.extend(f.comps[0].diff(ax) for ax in range(3))
    table = _PolyTable(polys)
    data_exact = 2 * max(max(f.degree for f in fields), k) + 2
    res = np.zeros((nf, 2))
    for eid, element in enumerate(mesh.elements):
        ops = ops_table[eid] if ops_table is not None \
            else LocalOps(mesh, element, k)
        lo = LocalLayout(k, len(element.faces))
        n3, n2 = ops.basis_k.dim, ops.curl_basis.dim
        vrule = elem_quadrature(element, mesh, data_exact)
        Pw = table.eval(vrule.points) * vrule.weights
        # ops may be shared across congruent elements, so its stored bases
        # can be centered elsewhere; rebuild them on this element (the
        # operator matrices are translation invariant in the local basis)
        bk = elem_basis(element, k)
        bc = elem_basis(element, ops.curl_degree)
        chk = cho_factor(ops.mass_k)
        proj_k = cho_solve(chk, bk.eval(vrule.points) @ Pw.T)
        chc = cho_factor(ops.curl_mass) if n2 else None
        proj_c = cho_solve(chc, bc.eval(vrule.points) @ Pw.T) \
            if n2 else np.zeros((0, Pw.shape[0]))
        faces = []
        for fid in element.faces:
            face = mesh.faces[fid]
            frule = face_quadrature(face, mesh, data_exact)
            Pfw = table.eval(frule.points) * frule.weights
            per_deg = []
            for d in (k, k - 1):
                fb = face_basis(face, d)
                chi = fb.eval(frule.points)
                Mf = np.einsum("iq,jq,q->ij", chi, chi, frule.weights)
                per_deg.append((fb, chi, cho_factor(0.5 * (Mf + Mf.T))))
            faces.append((Pfw, per_deg))
        for i in range(nf):
            r = 12 * i
            qh = np.zeros(lo.nvel)
            for c in range(3):
                qh[c * n3:(c + 1) * n3] = proj_k[:, r + c]
            ph = np.zeros(lo.npre)
            ph[:n3] = proj_k[:, r]
            for j, (Pfw, per_deg) in enumerate(faces):
                for sl, rows, (fb, chi, chf) in zip(
                        (lo.ub(j), lo.un(j)), (r, r + 3), per_deg):
                    vf = Pfw[rows:rows + 3]
                    coef = cho_solve(chf, chi @ np.stack(
                        [fb.t1 @ vf, fb.t2 @ vf], axis=1))
                    qh[sl] = coef.T.ravel()
                fb, chi, chf = per_deg[0]
                ph[lo.pb(j)] = cho_solve(chf, chi @ Pfw[r])
            rhs_cc = proj_c[:, r + 6:r + 9].T.ravel()
            lhs_cc = ops.curlcurl @ qh
            den = max(_vecnorm3(rhs_cc, ops.curl_mass, n2), 1.0)
            res[i, 0] = max(res[i, 0],
                            _vecnorm3(lhs_cc - rhs_cc, ops.curl_mass, n2)
                            / den)
            rhs_g = proj_k[:, r + 9:r + 12].T.ravel()
            lhs_g = ops.grad @ ph
            den_g = max(_vecnorm3(rhs_g, ops.mass_k, n3), 1.0)
            res[i, 1] = max(res[i, 1],
                            _vecnorm3(lhs_g - rhs_g, ops.mass_k, n3) / den_g)
    return res
