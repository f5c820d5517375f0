"""Exact polynomial fields: algebra, calculus identities, frozen oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgcurl.fields import (Polynomial3, VectorPoly, gradient_field,
                           random_scalar_poly, random_vector_poly)


def test_eval_and_degree():
    p = Polynomial3({(2, 1, 0): 3.0, (0, 0, 3): -1.0, (0, 0, 0): 2.0})
    assert p.degree == 3
    pts = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 2.0]])
    # 3 x^2 y - z^3 + 2
    assert np.allclose(p.eval(pts), [3 * 1 * 2 - 1 + 2, -8 + 2])


def test_zero_terms_dropped():
    p = Polynomial3({(1, 0, 0): 0.0, (0, 1, 0): 2.0})
    assert (1, 0, 0) not in p.terms
    assert Polynomial3.zero().degree == -1
    assert (p - p).terms == {}


def test_diff_exact():
    p = Polynomial3({(3, 2, 1): 4.0})
    dx = p.diff(0)
    assert dx.terms == {(2, 2, 1): 12.0}
    assert p.diff(2).terms == {(3, 2, 0): 4.0}
    assert p.diff(1).diff(1).terms == {(3, 0, 1): 8.0}


def test_algebra():
    a = Polynomial3({(1, 0, 0): 1.0})
    b = Polynomial3({(0, 1, 0): 2.0, (1, 0, 0): -1.0})
    assert (a + b).terms == {(0, 1, 0): 2.0}
    assert (a - b).terms == {(1, 0, 0): 2.0, (0, 1, 0): -2.0}
    assert (3.0 * a).terms == {(1, 0, 0): 3.0}


def test_curl_frozen_oracle():
    # u = (x^2 y - 3 z^3 + x y z, 2 y^2 z + x^3, x z^2 - y^4 + 5); its curl
    # is (-4 y^3 - 2 y^2, x y - 10 z^2, 2 x^2 - x z), derived symbolically
    u = VectorPoly(
        Polynomial3({(2, 1, 0): 1.0, (0, 0, 3): -3.0, (1, 1, 1): 1.0}),
        Polynomial3({(0, 2, 1): 2.0, (3, 0, 0): 1.0}),
        Polynomial3({(1, 0, 2): 1.0, (0, 4, 0): -1.0, (0, 0, 0): 5.0}),
    )
    c = u.curl()
    assert c.comps[0].terms == {(0, 3, 0): -4.0, (0, 2, 0): -2.0}
    assert c.comps[1].terms == {(1, 1, 0): 1.0, (0, 0, 2): -10.0}
    assert c.comps[2].terms == {(2, 0, 0): 2.0, (1, 0, 1): -1.0}
    assert u.divergence().terms == {(1, 1, 0): 2.0, (1, 0, 1): 2.0,
                                    (0, 1, 1): 5.0}


def test_vector_eval_shape():
    u = VectorPoly.zero()
    assert u.eval(np.zeros((5, 3))).shape == (5, 3)
    assert u.degree == -1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2 ** 31 - 1))
def test_curl_of_gradient_vanishes(degree, seed):
    rng = np.random.default_rng(seed)
    psi = random_scalar_poly(degree, rng)
    c = gradient_field(psi).curl()
    assert all(comp.terms == {} for comp in c.comps)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2 ** 31 - 1))
def test_divergence_of_curl_vanishes(degree, seed):
    rng = np.random.default_rng(seed)
    u = random_vector_poly(degree, rng)
    div = u.curl().divergence()
    assert max((abs(c) for c in div.terms.values()), default=0.0) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
def test_gradient_callables_match_fd(degree, seed):
    rng = np.random.default_rng(seed)
    u = random_vector_poly(degree, rng)
    grads = u.gradient_callables()
    pt = rng.uniform(0.2, 0.8, size=3)
    h = 1e-6
    for c in range(3):
        for ax in range(3):
            lo, hi = pt.copy(), pt.copy()
            lo[ax] -= h
            hi[ax] += h
            fd = (u.comps[c].eval(hi[None]) - u.comps[c].eval(lo[None])) \
                / (2 * h)
            assert grads[c][ax].eval(pt[None])[0] == \
                pytest.approx(fd[0], abs=1e-6)


def test_random_polys_have_requested_degree():
    rng = np.random.default_rng(0)
    assert random_vector_poly(3, rng).degree == 3
    assert random_scalar_poly(2, rng).degree == 2
