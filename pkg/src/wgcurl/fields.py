"""Exact trivariate polynomials used for data and oracles.

These are global (unscaled) monomial expansions with exact integer or
rational coefficients, so differentiation and evaluation are exact up to
floating-point rounding of the final values.
"""

from __future__ import annotations

import numpy as np


class Polynomial3:
    """Sparse trivariate polynomial sum c * x^a y^b z^c."""

    def __init__(self, terms: dict[tuple[int, int, int], float] | None = None):
        self.terms = {e: float(c) for e, c in (terms or {}).items() if c != 0.0}

    @classmethod
    def zero(cls) -> "Polynomial3":
        return cls({})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        for (a, b, c), coef in self.terms.items():
            out += coef * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c
        return out

    def diff(self, axis: int) -> "Polynomial3":
        out: dict[tuple[int, int, int], float] = {}
        for e, coef in self.terms.items():
            if e[axis] > 0:
                tgt = list(e)
                tgt[axis] -= 1
                tgt = tuple(tgt)
                out[tgt] = out.get(tgt, 0.0) + coef * e[axis]
        return Polynomial3(out)

    def __add__(self, other: "Polynomial3") -> "Polynomial3":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial3(out)

    def __sub__(self, other: "Polynomial3") -> "Polynomial3":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) - c
        return Polynomial3(out)

    def __mul__(self, s: float) -> "Polynomial3":
        return Polynomial3({e: c * s for e, c in self.terms.items()})

    __rmul__ = __mul__


class VectorPoly:
    """Vector field with Polynomial3 components."""

    def __init__(self, cx: Polynomial3, cy: Polynomial3, cz: Polynomial3):
        self.comps = (cx, cy, cz)

    @classmethod
    def zero(cls) -> "VectorPoly":
        return cls(Polynomial3.zero(), Polynomial3.zero(), Polynomial3.zero())

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.comps)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.stack([c.eval(pts) for c in self.comps], axis=1)

    def curl(self) -> "VectorPoly":
        cx, cy, cz = self.comps
        return VectorPoly(cz.diff(1) - cy.diff(2),
                          cx.diff(2) - cz.diff(0),
                          cy.diff(0) - cx.diff(1))

    def divergence(self) -> Polynomial3:
        return (self.comps[0].diff(0) + self.comps[1].diff(1)
                + self.comps[2].diff(2))

    def __sub__(self, other: "VectorPoly") -> "VectorPoly":
        return VectorPoly(*(a - b for a, b in zip(self.comps, other.comps)))

    def gradient_callables(self):
        """Per-component gradient evaluators, for finite-difference checks."""
        return [[c.diff(ax) for ax in range(3)] for c in self.comps]


def random_vector_poly(degree: int, rng: np.random.Generator,
                       scale: float = 1.0) -> VectorPoly:
    from .polyspace import exponents3
    exps = exponents3(degree)
    comps = []
    for _ in range(3):
        coefs = rng.uniform(-scale, scale, size=len(exps))
        comps.append(Polynomial3({tuple(e): c for e, c in zip(exps, coefs)}))
    return VectorPoly(*comps)


def random_scalar_poly(degree: int, rng: np.random.Generator,
                       scale: float = 1.0) -> Polynomial3:
    from .polyspace import exponents3
    exps = exponents3(degree)
    coefs = rng.uniform(-scale, scale, size=len(exps))
    return Polynomial3({tuple(e): c for e, c in zip(exps, coefs)})


def gradient_field(psi: Polynomial3) -> VectorPoly:
    return VectorPoly(psi.diff(0), psi.diff(1), psi.diff(2))
