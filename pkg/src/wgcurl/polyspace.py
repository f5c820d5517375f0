"""Scaled monomial bases on elements and faces, and exact quadrature.

Bases are monomials in (x - center)/h, so the element mass matrices have
h-independent conditioning on the uniform mesh families.  Quadrature is
tensor Gauss-Legendre on boxes/quads and collapsed Gauss-Jacobi (Duffy)
on tets/triangles, exact to any requested total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import Element, Face, GeometryError, face_frame


def dim_poly3(k: int) -> int:
    return (k + 1) * (k + 2) * (k + 3) // 6 if k >= 0 else 0


def dim_poly2(k: int) -> int:
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@lru_cache(maxsize=None)
def exponents3(k: int) -> np.ndarray:
    """Graded-lex exponent triples (a, b, c), a+b+c <= k."""
    out = [(a, b, c)
           for d in range(k + 1)
           for a in range(d, -1, -1)
           for b in range(d - a, -1, -1)
           for c in (d - a - b,)]
    return np.array(out, dtype=int).reshape(-1, 3)


@lru_cache(maxsize=None)
def exponents2(k: int) -> np.ndarray:
    out = [(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)]
    return np.array(out, dtype=int).reshape(-1, 2)


class ScalarBasis3D:
    """Monomials ((x-c)/h)^a ((y-c)/h)^b ((z-c)/h)^c, total degree <= k."""

    def __init__(self, center: np.ndarray, h: float, degree: int):
        if degree < 0:
            # the empty basis stands in for P_{-1} = {0}
            degree = -1
        self.center = np.asarray(center, dtype=float)
        self.h = float(h)
        self.degree = degree
        self.exps = exponents3(degree) if degree >= 0 else np.zeros((0, 3), int)
        self.dim = len(self.exps)

    def _scaled(self, pts: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(pts) - self.center) / self.h

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Values, shape (dim, npts)."""
        X = self._scaled(pts)
        k = max(self.degree, 0)
        pw = np.ones((3, k + 1, len(X)))
        for a in range(1, k + 1):
            pw[:, a] = pw[:, a - 1] * X.T
        e = self.exps
        return pw[0, e[:, 0]] * pw[1, e[:, 1]] * pw[2, e[:, 2]]

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Gradients, shape (dim, 3, npts)."""
        X = self._scaled(pts)
        npts = len(X)
        out = np.zeros((self.dim, 3, npts))
        for ax in range(3):
            e = self.exps.copy()
            mask = e[:, ax] > 0
            fac = e[:, ax] / self.h
            e[mask, ax] -= 1
            k = max(self.degree, 0)
            pw = np.ones((3, k + 1, npts))
            for a in range(1, k + 1):
                pw[:, a] = pw[:, a - 1] * X.T
            vals = pw[0, e[:, 0]] * pw[1, e[:, 1]] * pw[2, e[:, 2]]
            out[:, ax, :] = fac[:, None] * vals
        return out

    def diff_matrix(self, axis: int) -> np.ndarray:
        """Coefficient map of d/dx_axis back into this basis (exact)."""
        D = np.zeros((self.dim, self.dim))
        index = {tuple(e): i for i, e in enumerate(self.exps)}
        for j, e in enumerate(self.exps):
            if e[axis] > 0:
                tgt = list(e)
                tgt[axis] -= 1
                D[index[tuple(tgt)], j] = e[axis] / self.h
        return D

    def embed_matrix(self, other: "ScalarBasis3D") -> np.ndarray:
        """Coefficient embedding of this basis into a larger one (same frame)."""
        assert other.degree >= self.degree
        E = np.zeros((other.dim, self.dim))
        index = {tuple(e): i for i, e in enumerate(other.exps)}
        for j, e in enumerate(self.exps):
            E[index[tuple(e)], j] = 1.0
        return E


class ScalarBasis2D:
    """Monomials in face-frame coordinates scaled by the face diameter."""

    def __init__(self, center, t1, t2, normal, h: float, degree: int):
        if degree < 0:
            degree = -1
        self.center = np.asarray(center, dtype=float)
        self.t1, self.t2, self.normal = t1, t2, normal
        self.h = float(h)
        self.degree = degree
        self.exps = exponents2(degree) if degree >= 0 else np.zeros((0, 2), int)
        self.dim = len(self.exps)

    def frame_coords(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts - self.center
        off = np.abs(d @ self.normal)
        if off.size and off.max() > 1e-12:
            raise GeometryError(f"point off face plane by {off.max():.2e}")
        return np.stack([d @ self.t1, d @ self.t2], axis=1) / self.h

    def eval(self, pts: np.ndarray) -> np.ndarray:
        XI = self.frame_coords(pts)
        k = max(self.degree, 0)
        pw = np.ones((2, k + 1, len(XI)))
        for a in range(1, k + 1):
            pw[:, a] = pw[:, a - 1] * XI.T
        e = self.exps
        return pw[0, e[:, 0]] * pw[1, e[:, 1]]


def elem_basis(element: Element, degree: int) -> ScalarBasis3D:
    return ScalarBasis3D(element.centroid, element.diameter, degree)


def face_basis(face: Face, degree: int) -> ScalarBasis2D:
    t1, t2, n = face_frame(face)
    return ScalarBasis2D(face.centroid, t1, t2, n, face.diameter, degree)


@dataclass(frozen=True)
class QuadratureRule:
    kind: str
    points: np.ndarray   # (n, 3) physical coordinates
    weights: np.ndarray  # (n,)
    exactness_degree: int


def _gauss01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _jacobi01(m: int, alpha: int):
    # weight (1-x)^alpha on [0,1], weight function absorbed into w
    x, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (x + 1.0), w * 0.5 ** (alpha + 1)


def _npts(exactness: int) -> int:
    return exactness // 2 + 1


def quadrature(kind: str, coords: np.ndarray, exactness_degree: int) -> QuadratureRule:
    """Rule exact for all polynomials of total degree <= exactness_degree.

    coords: element/face vertex coordinates; boxes and quads must be
    affine images of the reference (true for the generated meshes).
    """
    if exactness_degree < 0:
        raise ValueError("exactness_degree must be >= 0")
    coords = np.asarray(coords, dtype=float)
    m = _npts(exactness_degree)

    if kind == "hex":
        g, w = _gauss01(m)
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        ext = hi - lo
        X, Y, Z = np.meshgrid(lo[0] + ext[0] * g, lo[1] + ext[1] * g,
                              lo[2] + ext[2] * g, indexing="ij")
        W = np.einsum("i,j,k->ijk", w, w, w) * np.prod(ext)
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        return QuadratureRule(kind, pts, W.ravel(), exactness_degree)

    if kind == "tet":
        v0, e = coords[0], coords[1:] - coords[0]
        detj = abs(np.linalg.det(e))
        u, wu = _jacobi01(m, 2)
        v, wv = _jacobi01(m, 1)
        t, wt = _gauss01(m)
        U, V, T = np.meshgrid(u, v, t, indexing="ij")
        x1 = U
        x2 = V * (1 - U)
        x3 = T * (1 - U) * (1 - V)
        W = np.einsum("i,j,k->ijk", wu, wv, wt) * detj
        ref = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=1)
        pts = v0 + ref @ e
        return QuadratureRule(kind, pts, W.ravel(), exactness_degree)

    if kind == "quad-face":
        # affine parallelogram spanned from corner 0 of the loop
        v0, e1, e2 = coords[0], coords[1] - coords[0], coords[3] - coords[0]
        area = np.linalg.norm(np.cross(e1, e2))
        g, w = _gauss01(m)
        U, V = np.meshgrid(g, g, indexing="ij")
        pts = v0 + np.outer(U.ravel(), e1) + np.outer(V.ravel(), e2)
        W = np.einsum("i,j->ij", w, w).ravel() * area
        return QuadratureRule(kind, pts, W, exactness_degree)

    if kind == "tri-face":
        v0, e1, e2 = coords[0], coords[1] - coords[0], coords[2] - coords[0]
        scale = np.linalg.norm(np.cross(e1, e2))  # = 2 * area
        u, wu = _jacobi01(m, 1)
        v, wv = _gauss01(m)
        U, V = np.meshgrid(u, v, indexing="ij")
        x1 = U
        x2 = V * (1 - U)
        pts = v0 + np.outer(x1.ravel(), e1) + np.outer(x2.ravel(), e2)
        W = np.einsum("i,j->ij", wu, wv).ravel() * scale
        return QuadratureRule(kind, pts, W, exactness_degree)

    raise ValueError(f"unsupported quadrature domain kind: {kind}")


def elem_quadrature(element: Element, mesh, exactness_degree: int) -> QuadratureRule:
    kind = "hex" if element.shape == "hexahedron" else "tet"
    coords = np.array([mesh.vertices[v].coords for v in element.vertices])
    return quadrature(kind, coords, exactness_degree)


def face_quadrature(face: Face, mesh, exactness_degree: int) -> QuadratureRule:
    kind = "quad-face" if len(face.vertex_loop) == 4 else "tri-face"
    coords = np.array([mesh.vertices[v].coords for v in face.vertex_loop])
    return quadrature(kind, coords, exactness_degree)


def mass_matrix(basis, rule: QuadratureRule) -> np.ndarray:
    """Gram matrix of the basis under the rule; needs exactness >= 2*degree."""
    if rule.exactness_degree < 2 * max(basis.degree, 0):
        raise ValueError("quadrature exactness insufficient for mass matrix")
    vals = basis.eval(rule.points)
    M = np.einsum("iq,jq,q->ij", vals, vals, rule.weights)
    return 0.5 * (M + M.T)
