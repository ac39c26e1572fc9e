"""Interpolating between bond and site percolation on the centered square lattice.

Integer sites are open with probability 1/2 throughout; face centers of one
parity are open with probability q, the others with 1-q.  q = 0 is critical
bond percolation on the square lattice, q = 1/2 is critical site percolation
on the centered square lattice.  The derivative of the crossing probability
in q equals the expected difference of pivotal-center counts (the generalized
Russo formula) -- exactly, as the enumerated polynomials show, and in Monte
Carlo along the whole interpolation.
"""

from fractions import Fraction

import torusperc as tp

RECT = (6, 6)
Q_GRID = (0.0, 0.125, 0.25, 0.375, 0.5)
TRIALS = 8000


def run():
    # exact on small rectangles: d/dq of the crossing polynomial is the
    # Russo expectation, coefficient for coefficient
    for (w, h) in ((2, 2), (2, 1)):
        small = tp.build_mixed_domain(w, h, [(0, 0), (w, 0), (w, h), (0, h)])
        P = tp.exact_polynomial(small, "crossing")
        R = tp.exact_polynomial(small, "russo")
        dP = tp.poly_derivative(P)
        width = max(len(dP), len(R))
        dP += [Fraction(0)] * (width - len(dP))
        R += [Fraction(0)] * (width - len(R))
        print(f"{w}x{h} crossing polynomial coefficients:", [str(c) for c in P])
        print("   derivative == Russo expectation:", dP == R)
    # the symmetric square came out independent of q: crossing and blocking
    # swap under the color flip there, pinning the probability at one half
    print()

    w, h = RECT
    dom = tp.build_mixed_domain(w, h, [(0, 0), (w, 0), (w, h), (0, h)])
    res = tp.interpolate(dom, Q_GRID, TRIALS, seed=42, workers=4)
    print(f"{w}x{h} rectangle, {TRIALS} trials per grid point")
    print(f"{'q':>6} {'P[crossing]':>12} {'se':>8} {'dP/dq':>9} {'se':>8}")
    for c, d in zip(res["curve"], res["derivative"]):
        print(f"{c['q']:>6.3f} {c['estimate']:>12.4f} {c['se']:>8.4f} "
              f"{d['estimate']:>9.4f} {d['se']:>8.4f}")
    print(f"endpoint difference {res['endpoint_difference']:+.4f} "
          f"+- {res['endpoint_difference_se']:.4f}")
    print(f"derivative quadrature {res['quadrature']:+.4f} "
          f"+- {res['quadrature_se']:.4f}")


if __name__ == "__main__":
    run()
