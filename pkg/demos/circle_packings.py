"""Periodic circle packings of the built-in torus triangulations.

Runs the radius iteration, prints radii and the extracted period ratio, and
writes SVG pictures. Refining a face of the centered-square triangulation
adds one small disc in a gap without disturbing the others, which is exactly
why the packing modulus ignores refinements.
"""

from pathlib import Path

import numpy as np

import torusperc as tp

OUT = Path(__file__).resolve().parent / "out"


def run():
    OUT.mkdir(exist_ok=True)
    for name in ("T_h", "T_s", "T_s_refined"):
        tri = tp.dual(tp.builtin(name))
        packing = tp.pack(tri)
        alpha = tp.alpha_cp(tri)
        radii = ", ".join(f"{r:.6f}" for r in packing.radii)
        print(f"dual({name}): radii [{radii}]")
        print(f"   angle residual {packing.residual:.2e}, "
              f"tangency error {packing.tangency_error:.2e}, "
              f"holonomy rotation {packing.holonomy_rotation:.2e}")
        print(f"   period ratio alpha_CP = {alpha:.10f}")
        svg = OUT / f"packing_{name}.svg"
        tp.packing_svg(packing, svg)
        print(f"   wrote {svg}")

    # the refinement adds exactly one disc; the original radii survive
    tri = tp.dual(tp.builtin("T_s"))
    base = tp.pack(tri)
    refined = tp.pack(tp.refine_face(tri, 0))
    scale = refined.radii[0] / base.radii[0]
    print("\nrefining one face of the centered-square triangulation:")
    print("   original radii (rescaled):", np.round(base.radii * scale, 6))
    print("   refined radii:            ", np.round(refined.radii, 6))


if __name__ == "__main__":
    run()
