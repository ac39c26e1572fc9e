"""Crossing probabilities of an equilateral triangle versus the exact limit.

Site percolation on the regular triangular lattice, domain an equilateral
triangle with corners A, B, C and a fourth point D on side CA: the limiting
probability of an open crossing between arcs [A,B] and [C,D] is |CD|/|CA|.
"""

import numpy as np

import torusperc as tp

RATIOS = (0.2, 0.35, 0.5, 0.65, 0.8)
DELTA = 0.02
TRIALS = 20_000


def run():
    g = tp.builtin("T_h")
    em = tp.balanced_embedding(g, tp.alpha_rw(g))
    a, b, c = 0j, 1 + 0j, 0.5 + 1j * np.sqrt(3) / 2
    print(f"mesh {DELTA}, {TRIALS} trials per point")
    print(f"{'|CD|/|CA|':>10} {'estimate':>10} {'std err':>9} {'deviation':>10}")
    for k, ratio in enumerate(RATIOS):
        d = c + ratio * (a - c)
        dom = tp.discretize(em, [a, b, c], DELTA, [a, b, c, d])
        st = tp.estimate_crossing(dom, 0.5, TRIALS, seed=100 + k, workers=4)
        print(f"{ratio:>10.2f} {st.estimate:>10.4f} {st.se:>9.4f} "
              f"{st.estimate - ratio:>+10.4f}")


if __name__ == "__main__":
    run()
