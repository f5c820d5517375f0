"""Symbolically derive the right-hand side of the benchmark problem.

Recomputes f = (curl)^4 u for the divergence-free manufactured solution
hard-coded in wgcurl.driver.manufactured_problem and prints both f and the
intermediate curls, so the frozen coefficients can be audited.

Usage: python scripts/derive_manufactured_rhs.py
"""

import sympy as sm

x, y, z = sm.symbols("x y z")

u = sm.Matrix([
    -2 * x ** 2 * y ** 2 * z,
    2 * x ** 2 * y ** 3 * z,
    -x * y ** 2 * z ** 2 * (3 * x - 2),
])


def curl(v):
    return sm.Matrix([
        sm.diff(v[2], y) - sm.diff(v[1], z),
        sm.diff(v[0], z) - sm.diff(v[2], x),
        sm.diff(v[1], x) - sm.diff(v[0], y),
    ])


def main():
    div = sm.expand(sm.diff(u[0], x) + sm.diff(u[1], y) + sm.diff(u[2], z))
    print("u =", u.T)
    print("div u =", div, "(must be 0)")
    assert div == 0

    w = u
    for n in range(1, 5):
        w = curl(w)
        print(f"(curl)^{n} u =", sm.expand(w.T))

    print("\nf coefficient dictionaries (exponent triple -> coefficient):")
    for comp in w:
        poly = sm.Poly(sm.expand(comp), x, y, z)
        print({m: float(c) for m, c in zip(poly.monoms(), poly.coeffs())})

    print("\nu(1,1,1) =", [float(c.subs({x: 1, y: 1, z: 1})) for c in u])


if __name__ == "__main__":
    main()
