"""Candidate conformal moduli of the built-in periodic graphs.

Computes the random-walk modulus (the root of the isotropy quadratic) and the
circle-packing modulus for each built-in graph, then exhibits the punchline:
splitting one vertex of the centered-square primal into a triangle leaves the
packing modulus at i but moves the walk modulus to i*sqrt(6/7), so the two
notions of conformal embedding genuinely disagree.
"""

import numpy as np

import torusperc as tp


def run():
    print(f"{'graph':>14} {'alpha_RW':>22} {'alpha_CP':>22}")
    for name in ("T_h", "T_s", "T_s_refined"):
        g = tp.builtin(name)
        a_rw = tp.alpha_rw(g)
        a_cp = tp.alpha_cp(tp.dual(g))
        print(f"{name:>14} {a_rw:>22.12f} {a_cp:>22.12f}")
    print()
    print("reference values: 1/sqrt(3) =", 1 / np.sqrt(3),
          "  sqrt(6/7) =", np.sqrt(6 / 7))

    # the covariance matrix is scalar exactly at alpha_RW
    g = tp.builtin("T_s_refined")
    for alpha, label in [(1j, "square modulus i"),
                         (tp.alpha_rw(g), "its own alpha_RW")]:
        cov = tp.covariance(tp.balanced_embedding(g, alpha))
        print(f"T_s_refined at {label}: xx={cov.xx:.6f} yy={cov.yy:.6f} "
              f"xy={cov.xy:+.6f}  anisotropy={cov.anisotropy:.2e}")

    # and simulated random walks agree with the formula
    em = tp.balanced_embedding(g, tp.alpha_rw(g))
    est = tp.monte_carlo_walk_covariance(em, steps=2000, replicates=4000, seed=1)
    print(f"walk covariance (MC):  xx={est.xx:.4f}+-{est.se_xx:.4f} "
          f"yy={est.yy:.4f}+-{est.se_yy:.4f} xy={est.xy:+.4f}+-{est.se_xy:.4f}")


if __name__ == "__main__":
    run()
