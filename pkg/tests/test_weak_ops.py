"""Weak operators: defining identities, commutativity, stabilizer kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgcurl.fields import Polynomial3, VectorPoly, random_vector_poly
from wgcurl.polyspace import elem_quadrature, face_quadrature, face_basis
from wgcurl.weak_ops import (LocalOps, check_commutativity,
                             project_onto_element, project_poly_coeffs,
                             project_scalar_onto_element, vector_curl_matrix,
                             weak_curlcurl_local, weak_gradient_local)


def _monomial_vector(c, exps):
    comps = [Polynomial3.zero()] * 3
    comps = list(comps)
    comps[c] = Polynomial3({exps: 1.0})
    return VectorPoly(*comps)


def test_vector_curl_matrix_against_field_curl(hex2):
    # apply the coefficient map to a field already in the scaled basis and
    # compare against the exact curl computed in the global monomial algebra
    T = hex2.elements[3]
    ops = LocalOps(hex2, T, 2)
    bk = ops.basis_k
    rng = np.random.default_rng(11)
    coeffs = rng.standard_normal(3 * bk.dim)
    Cm = vector_curl_matrix(bk)
    curled = Cm @ coeffs
    pts = rng.uniform(0.3, 0.7, size=(8, 3))
    vals = bk.eval(pts)
    got = (curled.reshape(3, bk.dim) @ vals).T          # (npts, 3)
    h = 1e-6

    def comp(p, c):
        return float((coeffs.reshape(3, bk.dim)[c] @ bk.eval(p))[0])

    def fd(pt, c, ax):
        hi, lo = pt.copy(), pt.copy()
        hi[ax] += h
        lo[ax] -= h
        return (comp(hi[None], c) - comp(lo[None], c)) / (2 * h)

    for ax, (i, j) in enumerate([(1, 2), (2, 0), (0, 1)]):
        for q, pt in enumerate(pts):
            # curl component ax = d(comp j)/dx_i - d(comp i)/dx_j
            assert got[q, ax] == pytest.approx(
                fd(pt, j, i) - fd(pt, i, j), abs=1e-5)


@pytest.mark.parametrize("family", ["hex", "tet"])
@pytest.mark.parametrize("k", [2, 3])
def test_weak_curlcurl_defining_identity(family, k, mesh_pair):
    # (curlcurl_w v, q)_T = (v0, curl curl q)_T - <vb x n, curl q>_dT
    #                       - <vn x n, q>_dT  for all q in [P_{k-1}(T)]^3
    mesh = mesh_pair[family]
    T = mesh.elements[0]
    ops = LocalOps(mesh, T, k)
    lo = ops.layout
    rng = np.random.default_rng(5 + k)
    v = rng.standard_normal(lo.nvel)
    vrule = elem_quadrature(T, mesh, 4 * k)
    br = ops.curl_basis
    bk = ops.basis_k
    cw = (ops.curlcurl @ v).reshape(3, br.dim)
    from wgcurl.polyspace import exponents3
    for c in range(3):
        for exps in map(tuple, exponents3(k - 1)):
            q = _monomial_vector(c, exps)
            qv = q.eval(vrule.points)
            lhs = 0.0
            brv = br.eval(vrule.points)
            for cc in range(3):
                lhs += np.dot(vrule.weights, (cw[cc] @ brv) * qv[:, cc])
            ccq = q.curl().curl()
            u0 = v[:3 * lo.n3].reshape(3, lo.n3)
            bkv = bk.eval(vrule.points)
            rhs = sum(np.dot(vrule.weights,
                             (u0[cc] @ bkv) * ccq.eval(vrule.points)[:, cc])
                      for cc in range(3))
            for i, fid in enumerate(T.faces):
                face = mesh.faces[fid]
                s = T.face_signs[i]
                fb = face_basis(face, k)
                fn = face_basis(face, k - 1)
                frule = face_quadrature(face, mesh, 4 * k)
                n_out = s * face.normal
                chib = fb.eval(frule.points)
                chin = fn.eval(frule.points)
                cb = v[lo.ub(i)]
                cn = v[lo.un(i)]
                vb = (np.outer(cb[:fb.dim] @ chib, fb.t1)
                      + np.outer(cb[fb.dim:] @ chib, fb.t2))
                vn = (np.outer(cn[:fn.dim] @ chin, fn.t1)
                      + np.outer(cn[fn.dim:] @ chin, fn.t2))
                cq = q.curl().eval(frule.points)
                qf = q.eval(frule.points)
                rhs -= np.dot(frule.weights,
                              np.einsum("qc,qc->q", np.cross(vb, n_out), cq))
                rhs -= np.dot(frule.weights,
                              np.einsum("qc,qc->q", np.cross(vn, n_out), qf))
            assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(rhs)))


@pytest.mark.parametrize("family", ["hex", "tet"])
@pytest.mark.parametrize("k", [2, 3])
def test_weak_gradient_defining_identity(family, k, mesh_pair):
    # (grad_w p, psi)_T = -(p0, div psi)_T + <pb, psi . n>_dT
    # for all psi in [P_k(T)]^3
    mesh = mesh_pair[family]
    T = mesh.elements[-1]
    ops = LocalOps(mesh, T, k)
    lo = ops.layout
    rng = np.random.default_rng(17 + k)
    p = rng.standard_normal(lo.npre)
    G = (ops.grad @ p).reshape(3, ops.grad_basis.dim)
    vrule = elem_quadrature(T, mesh, 4 * k)
    bg = ops.grad_basis
    bk = ops.basis_k
    from wgcurl.polyspace import exponents3
    for c in range(3):
        for exps in map(tuple, exponents3(k)):
            psi = _monomial_vector(c, exps)
            pv = psi.eval(vrule.points)
            bgv = bg.eval(vrule.points)
            lhs = sum(np.dot(vrule.weights, (G[cc] @ bgv) * pv[:, cc])
                      for cc in range(3))
            div = psi.divergence()
            p0 = p[:lo.n3]
            bkv = bk.eval(vrule.points)
            rhs = -np.dot(vrule.weights,
                          (p0 @ bkv) * div.eval(vrule.points))
            for i, fid in enumerate(T.faces):
                face = mesh.faces[fid]
                s = T.face_signs[i]
                fb = face_basis(face, k)
                frule = face_quadrature(face, mesh, 4 * k)
                chib = fb.eval(frule.points)
                pb = p[lo.pb(i)] @ chib
                psin = psi.eval(frule.points) @ (s * face.normal)
                rhs += np.dot(frule.weights, pb * psin)
            assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(rhs)))


@pytest.mark.parametrize("family", ["hex", "tet"])
@pytest.mark.parametrize("k", [2, 3])
def test_commutativity_random_fields(family, k, mesh_pair):
    mesh = mesh_pair[family]
    rng = np.random.default_rng(23)
    worst = 0.0
    for T in mesh.elements[:3]:
        ops = LocalOps(mesh, T, k)
        for degree in range(k + 2):
            for _ in range(3):
                w = random_vector_poly(degree, rng)
                r1, r2 = check_commutativity(mesh, T, k, w, ops=ops)
                worst = max(worst, r1, r2)
    assert worst <= 1e-10


@pytest.mark.parametrize("family", ["hex", "tet"])
def test_commutativity_batch_matches_per_element(family, mesh_pair):
    # the batched sweep must reproduce the per-element oracle, including
    # on meshes where congruent elements share a LocalOps instance
    from wgcurl.assembly import local_operator_table
    from wgcurl.weak_ops import check_commutativity_batch
    mesh = mesh_pair[family]
    k = 2
    rng = np.random.default_rng(5)
    fields = [random_vector_poly(3, rng) for _ in range(3)]
    ops, _ = local_operator_table(mesh, k)
    res = check_commutativity_batch(mesh, k, fields, ops_table=ops)
    assert res.shape == (3, 2)
    ref = np.zeros_like(res)
    for eid, T in enumerate(mesh.elements):
        for i, f in enumerate(fields):
            r1, r2 = check_commutativity(mesh, T, k, f, ops=ops[eid])
            ref[i, 0] = max(ref[i, 0], r1)
            ref[i, 1] = max(ref[i, 1], r2)
    assert np.abs(res - ref).max() <= 1e-12


@pytest.mark.parametrize("family", ["hex", "tet"])
def test_projection_reproduces_polynomials(family, mesh_pair):
    # degree <= k fields lie in the discrete space, so the projection is
    # exact: interior values match pointwise and the stabilizer vanishes
    mesh = mesh_pair[family]
    k = 2
    T = mesh.elements[0]
    ops = LocalOps(mesh, T, k)
    lo = ops.layout
    rng = np.random.default_rng(2)
    u = random_vector_poly(k, rng)
    lv = project_onto_element(mesh, T, k, u, 2 * k + 2)
    vrule = elem_quadrature(T, mesh, 2 * k)
    vals = ops.basis_k.eval(vrule.points)
    got = (lv[:3 * lo.n3].reshape(3, lo.n3) @ vals).T
    assert np.allclose(got, u.eval(vrule.points), atol=1e-11)
    assert np.linalg.norm(ops.s1_loc @ lv) < 1e-10


@pytest.mark.parametrize("family", ["hex", "tet"])
def test_scalar_projection_kernel_of_s2(family, mesh_pair):
    mesh = mesh_pair[family]
    k = 2
    T = mesh.elements[0]
    ops = LocalOps(mesh, T, k)
    rng = np.random.default_rng(4)
    from wgcurl.fields import random_scalar_poly
    s = random_scalar_poly(k, rng)
    lp = project_scalar_onto_element(mesh, T, k, s, 2 * k + 2)
    assert np.linalg.norm(ops.s2_loc @ lp) < 1e-10


def test_stabilizers_symmetric_psd(hex2):
    ops = LocalOps(hex2, hex2.elements[0], 2)
    for S in (ops.s1_loc, ops.s2_loc, ops.a_loc):
        assert np.allclose(S, S.T, atol=1e-12)
        assert np.linalg.eigvalsh(S).min() > -1e-9


def test_wrapper_matrices_shapes(tet1):
    T = tet1.elements[0]
    G = weak_gradient_local(tet1, T, 2)
    C = weak_curlcurl_local(tet1, T, 2)
    lo = LocalOps(tet1, T, 2).layout
    assert G.shape == (3 * lo.n3, lo.npre)
    assert C.shape == (3 * 4, lo.nvel)       # [P_1]^3 target


def test_degree_validation(hex1):
    T = hex1.elements[0]
    with pytest.raises(ValueError):
        LocalOps(hex1, T, 0)
    with pytest.raises(ValueError):
        LocalOps(hex1, T, 2, curl_degree=2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_project_poly_coeffs_exact(seed):
    from wgcurl.mesh import generate_hex_mesh
    mesh = generate_hex_mesh(1)
    T = mesh.elements[0]
    rng = np.random.default_rng(seed)
    u = random_vector_poly(2, rng)
    coeffs = project_poly_coeffs(mesh, T, u, 2, 8)
    from wgcurl.polyspace import elem_basis
    bk = elem_basis(T, 2)
    pts = rng.uniform(0.1, 0.9, size=(6, 3))
    got = (coeffs.reshape(3, bk.dim) @ bk.eval(pts)).T
    assert np.allclose(got, u.eval(pts), atol=1e-10)
