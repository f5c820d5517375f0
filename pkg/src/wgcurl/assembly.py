"""Global DOF layout, sparse assembly and boundary-data imposition.

Face unknowns are full 3-vectors in principle, but only their tangential
components (stored in the shared face frame) enter the consistency terms.
The normal components appear in the stabilizer alone, so they either
condense exactly into interior-face jump penalties on u0 . n and
(curl u0) . n with half the stabilizer weight (small systems, see
normal_penalty_matrix) or are kept as explicit auxiliary face unknowns
(large systems, see augmented_normal_blocks); the two forms produce the
same solution.

The global block system is [[A+S1, B], [B^T, -S2]] (second equation
negated for symmetry) over the full DOF set; constrained boundary DOFs
are eliminated with a lift.  Element-local matrices are translation
invariant, so they are cached per congruence class (relative geometry +
face frames + orientation signs), which makes uniform-grid assembly
cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .polyspace import (dim_poly2, dim_poly3, elem_basis, elem_quadrature,
                        face_basis, face_quadrature)
from .weak_ops import DEFAULT_SCALE, LocalOps, vector_curl_matrix


class DofLayout:
    """Global indices: [u0 | ub | un | p0 | pb], element/face major."""

    def __init__(self, mesh: Mesh, k: int):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.mesh = mesh
        self.k = k
        self.n3 = dim_poly3(k)
        self.nb = dim_poly2(k)
        self.nn = dim_poly2(k - 1)
        ne, nf = len(mesh.elements), len(mesh.faces)
        self.nu0 = ne * 3 * self.n3
        self.nub = nf * 2 * self.nb
        self.nun = nf * 2 * self.nn
        self.nvel = self.nu0 + self.nub + self.nun
        self.np0 = ne * self.n3
        self.npb = nf * self.nb
        self.ndof = self.nvel + self.np0 + self.npb

        constrained = np.zeros(self.ndof, dtype=bool)
        for f in mesh.faces:
            if f.is_boundary:
                constrained[self.ub_slice(f.id)] = True
                constrained[self.un_slice(f.id)] = True
                constrained[self.pb_slice(f.id)] = True
        self.constrained = constrained
        self.free = ~constrained
        self.n_free = int(self.free.sum())
        self.full_to_free = np.full(self.ndof, -1, dtype=np.int64)
        self.full_to_free[self.free] = np.arange(self.n_free)

    def u0_slice(self, eid: int) -> slice:
        return slice(eid * 3 * self.n3, (eid + 1) * 3 * self.n3)

    def ub_slice(self, fid: int) -> slice:
        s = self.nu0 + fid * 2 * self.nb
        return slice(s, s + 2 * self.nb)

    def un_slice(self, fid: int) -> slice:
        s = self.nu0 + self.nub + fid * 2 * self.nn
        return slice(s, s + 2 * self.nn)

    def p0_slice(self, eid: int) -> slice:
        s = self.nvel + eid * self.n3
        return slice(s, s + self.n3)

    def pb_slice(self, fid: int) -> slice:
        s = self.nvel + self.np0 + fid * self.nb
        return slice(s, s + self.nb)

    def element_velocity_dofs(self, eid: int) -> np.ndarray:
        """Global velocity indices in the LocalLayout order."""
        T = self.mesh.elements[eid]
        parts = [np.arange(self.u0_slice(eid).start, self.u0_slice(eid).stop)]
        for fid in T.faces:
            parts.append(np.arange(self.ub_slice(fid).start,
                                   self.ub_slice(fid).stop))
            parts.append(np.arange(self.un_slice(fid).start,
                                   self.un_slice(fid).stop))
        return np.concatenate(parts)

    def element_pressure_dofs(self, eid: int) -> np.ndarray:
        T = self.mesh.elements[eid]
        parts = [np.arange(self.p0_slice(eid).start, self.p0_slice(eid).stop)]
        for fid in T.faces:
            parts.append(np.arange(self.pb_slice(fid).start,
                                   self.pb_slice(fid).stop))
        return np.concatenate(parts)


def build_dof_layout(mesh: Mesh, k: int) -> DofLayout:
    return DofLayout(mesh, k)


def _class_key(mesh: Mesh, element) -> tuple:
    c = element.centroid
    rel = tuple(tuple(np.round(mesh.vertices[v].coords - c, 12))
                for v in element.vertices)
    fdat = []
    for fid, s in zip(element.faces, element.face_signs):
        f = mesh.faces[fid]
        fdat.append((tuple(np.round(f.centroid - c, 12)),
                     tuple(np.round(f.normal, 12)), s,
                     round(f.diameter, 12), f.is_boundary))
    return (element.shape, rel, tuple(fdat))


@dataclass
class StabConfig:
    """Stabilizer weights shared by assembly, solving and error norms."""
    exponents: tuple[float, float, float] = (-3.0, -1.0, -2.0)
    scale: float = DEFAULT_SCALE
    prefactors: tuple[float, float, float] = (1.0, 1.0, 1.0)
    normal_trace: bool = True

    def face_weights(self, h_T: float) -> tuple[float, float]:
        """(u-trace weight, curl-trace weight) on a face of an element of
        diameter h_T."""
        hs = h_T * self.scale
        e1, e2, _ = self.exponents
        c1, c2, _ = self.prefactors
        return c1 * hs ** e1, c2 * hs ** e2


@dataclass
class SaddleSystem:
    mesh: Mesh
    k: int
    layout: DofLayout
    K: sp.csr_matrix            # full DOF set, no normal-trace terms
    F: np.ndarray               # full load vector
    ops: list[LocalOps]         # per element, shared within a class
    stab: StabConfig = field(default_factory=StabConfig)
    boundary_values: np.ndarray | None = None   # lift, set by impose_boundary

    @property
    def n_free(self) -> int:
        return self.layout.n_free

    def velocity_energy(self, v_full_velocity: np.ndarray) -> float:
        """|||v|||^2 quadratic form: sum_T a_T + s1_T over velocity DOFs,
        including the condensed normal-trace jump penalties."""
        lay = self.layout
        total = 0.0
        for eid, ops in enumerate(self.ops):
            idx = lay.element_velocity_dofs(eid)
            vl = v_full_velocity[idx]
            total += vl @ (ops.a_loc + ops.s1_loc) @ vl
        if self.stab.normal_trace:
            total += normal_jump_energy(self, v_full_velocity)
        return total


def local_operator_table(
        mesh: Mesh, k: int,
        stab_exponents: tuple[float, float, float] = (-3.0, -1.0, -2.0),
        stab_scale: float = DEFAULT_SCALE,
        stab_prefactors: tuple[float, float, float] = (1.0, 1.0, 1.0),
        grad_degree: int | None = None,
) -> tuple[list[LocalOps], dict]:
    cache: dict = {}
    ops = []
    for T in mesh.elements:
        key = _class_key(mesh, T)
        lo = cache.get(key)
        if lo is None:
            lo = LocalOps(mesh, T, k, stab_exponents=stab_exponents,
                          stab_scale=stab_scale,
                          stab_prefactors=stab_prefactors,
                          grad_degree=grad_degree)
            cache[key] = lo
        ops.append(lo)
    return ops, cache


def assemble_system(mesh: Mesh, k: int, f=None,
                    data_exactness: int | None = None,
                    workers: int = 1,
                    stab_exponents: tuple[float, float, float] = (-3.0, -1.0, -2.0),
                    stab_scale: float = DEFAULT_SCALE,
                    stab_prefactors: tuple[float, float, float] = (1.0, 1.0, 1.0),
                    grad_degree: int | None = None,
                    normal_trace: bool = True,
                    ) -> SaddleSystem:
    """Assemble the saddle-point matrix and load over the full DOF set.

    f: callable pts(n,3) -> (n,3), integrated against the interior velocity
    basis; None means zero load.  workers > 1 splits the element loop; the
    scatter order is fixed by element id either way, so the assembled
    values are identical for any worker count.

    The returned matrix holds the element-local forms only.  When
    normal_trace is set, the normal-component stabilizer terms live in
    separate structures (normal_penalty_matrix / augmented_normal_blocks)
    so large meshes never materialize their condensed coupling.
    """
    layout = DofLayout(mesh, k)
    ops, _ = local_operator_table(mesh, k, stab_exponents, stab_scale,
                                  stab_prefactors, grad_degree)
    if data_exactness is None:
        data_exactness = k + 6

    rows, cols, vals = [], [], []
    F = np.zeros(layout.ndof)

    def element_entries(eid: int):
        T = mesh.elements[eid]
        lo = ops[eid]
        vidx = layout.element_velocity_dofs(eid).astype(np.int32)
        pidx = layout.element_pressure_dofs(eid).astype(np.int32)
        Avv = lo.a_loc + lo.s1_loc
        ent = []
        ent.append((vidx, vidx, Avv))
        nu0 = 3 * layout.n3
        ent.append((vidx[:nu0], pidx, lo.b_loc))
        ent.append((pidx, vidx[:nu0], lo.b_loc.T))
        ent.append((pidx, pidx, -lo.s2_loc))
        fe = None
        if f is not None:
            rule = elem_quadrature(T, mesh, data_exactness)
            fv = np.asarray(f(rule.points))
            # cached ops belong to the class representative; evaluate in
            # this element's own centered basis
            vals_k = elem_basis(T, k).eval(rule.points)
            fe = np.einsum("q,iq,qc->ci", rule.weights, vals_k,
                           fv).ravel()
        return eid, ent, fe

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(element_entries, range(len(mesh.elements))))
        results.sort(key=lambda r: r[0])
    else:
        results = [element_entries(e) for e in range(len(mesh.elements))]

    for eid, ent, fe in results:
        for r, c, block in ent:
            R, C = np.meshgrid(r, c, indexing="ij")
            rows.append(R.ravel())
            cols.append(C.ravel())
            vals.append(block.ravel())
        if fe is not None:
            F[layout.u0_slice(eid)] += fe
    del results
    rcat = np.concatenate(rows)
    rows.clear()
    ccat = np.concatenate(cols)
    cols.clear()
    vcat = np.concatenate(vals)
    vals.clear()
    K = sp.coo_matrix((vcat, (rcat, ccat)),
                      shape=(layout.ndof, layout.ndof)).tocsr()
    stab = StabConfig(stab_exponents, stab_scale, stab_prefactors,
                      bool(normal_trace))
    return SaddleSystem(mesh, k, layout, K, F, ops, stab=stab)


def _face_normal_operators(mesh: Mesh, k: int, face, rule):
    """Per-side normal-trace evaluation operators on one face.

    Yields (eid, E, Ec): E maps the element's u0 coefficient block to
    u0 . n at the quadrature points, Ec likewise for (curl u0) . n.
    """
    n3 = dim_poly3(k)
    for eid in face.neighbors:
        T = mesh.elements[eid]
        bke = elem_basis(T, k)
        vk = bke.eval(rule.points)                    # (n3, nq)
        curlm = vector_curl_matrix(bke)               # (3n3, 3n3)
        ncurl = sum(face.normal[c] * curlm[c * n3:(c + 1) * n3]
                    for c in range(3))                # (n3, 3n3)
        E = np.hstack([face.normal[c] * vk.T for c in range(3)])
        Ec = vk.T @ ncurl
        yield eid, E, Ec


def normal_penalty_matrix(system: SaddleSystem) -> sp.csr_matrix:
    """Condensed normal-trace stabilizer: interior-face jump penalties on
    u0 . n and (curl u0) . n with half the s1 face weights.

    Exactly what remains of the full-vector trace stabilizer after the
    normal trace components (which appear nowhere else) are eliminated;
    boundary faces contribute nothing.
    """
    mesh, k, layout = system.mesh, system.k, system.layout
    n3 = layout.n3
    jr, jc, jv = [], [], []
    for face in mesh.faces:
        if face.is_boundary:
            continue
        w1, w2 = system.stab.face_weights(
            mesh.elements[face.neighbors[0]].diameter)
        rule = face_quadrature(face, mesh, 2 * k + 2)
        wq = rule.weights
        Es, Ecs = [], []
        for side, (eid, E, Ec) in enumerate(
                _face_normal_operators(mesh, k, face, rule)):
            sgn = 1.0 if side == 0 else -1.0
            Es.append(sgn * E)
            Ecs.append(sgn * Ec)
        E = np.hstack(Es)
        Ec = np.hstack(Ecs)
        Sf = 0.5 * w1 * (E.T * wq) @ E + 0.5 * w2 * (Ec.T * wq) @ Ec
        idx = np.concatenate([
            np.arange(layout.u0_slice(eid).start, layout.u0_slice(eid).stop,
                      dtype=np.int32)
            for eid in face.neighbors])
        R, C = np.meshgrid(idx, idx, indexing="ij")
        jr.append(R.ravel())
        jc.append(C.ravel())
        jv.append(Sf.ravel())
    if not jr:
        return sp.csr_matrix((layout.ndof, layout.ndof))
    return sp.coo_matrix(
        (np.concatenate(jv), (np.concatenate(jr), np.concatenate(jc))),
        shape=(layout.ndof, layout.ndof)).tocsr()


def normal_jump_energy(system: SaddleSystem, v_full: np.ndarray) -> float:
    """Quadratic form of normal_penalty_matrix applied without building it."""
    mesh, k, layout = system.mesh, system.k, system.layout
    total = 0.0
    for face in mesh.faces:
        if face.is_boundary:
            continue
        w1, w2 = system.stab.face_weights(
            mesh.elements[face.neighbors[0]].diameter)
        rule = face_quadrature(face, mesh, 2 * k + 2)
        ju = np.zeros(len(rule.weights))
        jc = np.zeros(len(rule.weights))
        for side, (eid, E, Ec) in enumerate(
                _face_normal_operators(mesh, k, face, rule)):
            sgn = 1.0 if side == 0 else -1.0
            u0 = v_full[layout.u0_slice(eid)]
            ju += sgn * (E @ u0)
            jc += sgn * (Ec @ u0)
        total += 0.5 * w1 * np.dot(rule.weights, ju ** 2)
        total += 0.5 * w2 * np.dot(rule.weights, jc ** 2)
    return total


@dataclass
class AuxLayout:
    """Indices of the explicit normal-trace unknowns, face major."""
    nb: int
    nn: int
    nfaces: int

    @property
    def per_face(self) -> int:
        return self.nb + self.nn

    @property
    def naux(self) -> int:
        return self.nfaces * self.per_face

    def um_slice(self, fid: int) -> slice:
        s = fid * self.per_face
        return slice(s, s + self.nb)

    def wn_slice(self, fid: int) -> slice:
        s = fid * self.per_face + self.nb
        return slice(s, s + self.nn)

    def face_slice(self, fid: int) -> slice:
        s = fid * self.per_face
        return slice(s, s + self.per_face)


def augmented_normal_blocks(system: SaddleSystem):
    """Uncondensed normal-trace stabilizer as explicit face unknowns.

    Returns (N, C, D, aux): for auxiliary unknowns m = (um, wn) per face,
    the stabilizer normal part is  [v0; m]^T [[N, C], [C^T, D]] [u0; m].
    Eliminating m reproduces normal_penalty_matrix exactly, but every
    coupling stays local to one element and its faces, which the
    substructured solver requires.
    """
    mesh, k, layout = system.mesh, system.k, system.layout
    aux = AuxLayout(layout.nb, layout.nn, len(mesh.faces))
    nr, nc, nv = [], [], []
    cr, cc, cv = [], [], []
    dr, dc, dv = [], [], []

    def scatter(acc, ridx, cidx, block):
        R, C = np.meshgrid(ridx, cidx, indexing="ij")
        acc[0].append(R.ravel())
        acc[1].append(C.ravel())
        acc[2].append(block.ravel())

    for face in mesh.faces:
        rule = face_quadrature(face, mesh, 2 * k + 2)
        wq = rule.weights
        chib = face_basis(face, k).eval(rule.points)          # (nb, nq)
        chin = face_basis(face, k - 1).eval(rule.points)      # (nn, nq)
        um = np.arange(aux.um_slice(face.id).start,
                       aux.um_slice(face.id).stop, dtype=np.int64)
        wn = np.arange(aux.wn_slice(face.id).start,
                       aux.wn_slice(face.id).stop, dtype=np.int64)
        for eid, E, Ec in _face_normal_operators(mesh, k, face, rule):
            w1, w2 = system.stab.face_weights(mesh.elements[eid].diameter)
            u0 = np.arange(layout.u0_slice(eid).start,
                           layout.u0_slice(eid).stop, dtype=np.int64)
            scatter((nr, nc, nv), u0, u0,
                    w1 * (E.T * wq) @ E + w2 * (Ec.T * wq) @ Ec)
            scatter((cr, cc, cv), u0, um, -w1 * (E.T * wq) @ chib.T)
            if aux.nn:
                scatter((cr, cc, cv), u0, wn, -w2 * (Ec.T * wq) @ chin.T)
            scatter((dr, dc, dv), um, um, w1 * (chib * wq) @ chib.T)
            if aux.nn:
                scatter((dr, dc, dv), wn, wn, w2 * (chin * wq) @ chin.T)

    def build(acc, shape):
        if not acc[0]:
            return sp.csr_matrix(shape)
        return sp.coo_matrix(
            (np.concatenate(acc[2]),
             (np.concatenate(acc[0]), np.concatenate(acc[1]))),
            shape=shape).tocsr()

    N = build((nr, nc, nv), (layout.ndof, layout.ndof))
    C = build((cr, cc, cv), (layout.ndof, aux.naux))
    D = build((dr, dc, dv), (aux.naux, aux.naux))
    return N, C, D, aux


def substructure_partition(system: SaddleSystem,
                           aux: AuxLayout | None = None):
    """Octant substructuring of the free (plus auxiliary) unknowns.

    Splits the unit cube by the three mid-planes.  Every element lies
    strictly inside one octant; a face either lies inside an octant or in
    a cut plane (the interface).  All couplings of the assembled system
    (element-local forms plus the explicit normal-trace blocks) stay
    within one octant or touch the interface, never two octants.

    Returns [domain_0, ..., domain_7, interface] as index arrays into the
    solve vector [free base DOFs | auxiliary DOFs], or None when the mesh
    cannot be split (some element centroid sits on a cut plane).
    """
    mesh, layout = system.mesh, system.layout
    tol = 1e-12
    for T in mesh.elements:
        if any(abs(c - 0.5) < tol for c in T.centroid):
            return None

    n_free = layout.n_free
    groups: list[list[np.ndarray]] = [[] for _ in range(9)]

    def octant(c):
        return int(c[0] > 0.5) + 2 * int(c[1] > 0.5) + 4 * int(c[2] > 0.5)

    def free_range(slc):
        idx = layout.full_to_free[slc.start:slc.stop]
        return idx[idx >= 0]

    for eid, T in enumerate(mesh.elements):
        o = octant(T.centroid)
        groups[o].append(free_range(layout.u0_slice(eid)))
        groups[o].append(free_range(layout.p0_slice(eid)))
    for f in mesh.faces:
        on_plane = any(abs(f.centroid[c] - 0.5) < tol
                       and abs(abs(f.normal[c]) - 1.0) < tol
                       for c in range(3))
        g = 8 if on_plane else octant(f.centroid)
        for slc in (layout.ub_slice(f.id), layout.un_slice(f.id),
                    layout.pb_slice(f.id)):
            groups[g].append(free_range(slc))
        if aux is not None:
            slc = aux.face_slice(f.id)
            groups[g].append(np.arange(n_free + slc.start,
                                       n_free + slc.stop, dtype=np.int64))

    parts = [np.sort(np.concatenate(g)) if g else np.zeros(0, dtype=np.int64)
             for g in groups]
    if any(len(p) == 0 for p in parts[:8]) or len(parts[8]) == 0:
        return None
    return parts


def project_face_tangential(mesh: Mesh, fid: int, vec_fun, degree: int,
                            data_exactness: int) -> np.ndarray:
    """L2-project the tangential part of a vector field onto the face's
    2-component tangential P_degree(e) space; returns [t1-block, t2-block]."""
    face = mesh.faces[fid]
    fb = face_basis(face, degree)
    rule = face_quadrature(face, mesh, max(data_exactness, 2 * degree))
    chi = fb.eval(rule.points)
    M = np.einsum("iq,jq,q->ij", chi, chi, rule.weights)
    vals = np.asarray(vec_fun(rule.points))
    out = np.empty(2 * fb.dim)
    Minv = np.linalg.cholesky(0.5 * (M + M.T))
    from scipy.linalg import cho_solve
    for a, tan in enumerate((fb.t1, fb.t2)):
        rhs = chi @ (rule.weights * (vals @ tan))
        out[a * fb.dim:(a + 1) * fb.dim] = cho_solve((Minv, True), rhs)
    return out


def impose_boundary(system: SaddleSystem, g1=None, g2=None,
                    data_exactness: int | None = None):
    """Eliminate constrained DOFs with the boundary lift.

    g1, g2: callables (pts(n,3), normal(3,)) -> (n,3) for u x n and
    (curl u) x n on the domain boundary; None means homogeneous.  The
    tangential trace of u is n x g1 and of curl u is n x g2 (n is the
    outward boundary normal).  Returns (K_free csc, F_free, x_full).

    The normal-trace stabilizer never touches constrained DOFs (only
    interior u0 blocks and auxiliary unknowns), so the lift is complete
    even though system.K excludes it.
    """
    lay = system.layout
    mesh = system.mesh
    if data_exactness is None:
        data_exactness = system.k + 6
    x_full = np.zeros(lay.ndof)
    for f in mesh.faces:
        if not f.is_boundary:
            continue
        n = f.normal  # owner is the single element: points out of the domain
        if g1 is not None:
            def tang_u(pts, n=n):
                return np.cross(n, np.asarray(g1(pts, n)))
            x_full[lay.ub_slice(f.id)] = project_face_tangential(
                mesh, f.id, tang_u, system.k, data_exactness)
        if g2 is not None:
            def tang_cu(pts, n=n):
                return np.cross(n, np.asarray(g2(pts, n)))
            x_full[lay.un_slice(f.id)] = project_face_tangential(
                mesh, f.id, tang_cu, system.k - 1, data_exactness)
        # pb = 0 on the boundary
    system.boundary_values = x_full
    Kcsc = system.K.tocsc()
    free = np.flatnonzero(lay.free)
    cons = np.flatnonzero(lay.constrained)
    F_free = system.F[free] - Kcsc[:, cons][free, :] @ x_full[cons]
    K_free = Kcsc[:, free][free, :]
    return K_free.tocsc(), F_free, x_full


def dump_matrix_coo(K: sp.spmatrix, path: str) -> None:
    """Write (row, col, value) triplets, one per line."""
    coo = K.tocoo()
    with open(path, "w") as fp:
        fp.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fp.write(f"{r} {c} {float(v)!r}\n")
