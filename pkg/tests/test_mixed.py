from fractions import Fraction

import numpy as np
import pytest

import torusperc as tp
from torusperc.mixed import MixedError, TYPE_I, TYPE_II, TYPE_III

import reference


def corners(w, h):
    return [(0, 0), (w, 0), (w, h), (0, h)]


def test_build_counts_2x2():
    d = tp.build_mixed_domain(2, 2, corners(2, 2))
    assert int((d.types == TYPE_I).sum()) == 9
    assert int((d.types == TYPE_II).sum()) == 2
    assert int((d.types == TYPE_III).sum()) == 2


def test_build_counts_1x1():
    d = tp.build_mixed_domain(1, 1, corners(1, 1))
    assert int((d.types == TYPE_I).sum()) == 4
    assert d.n_sites == 5


def test_build_rejects_bad_marks():
    with pytest.raises(MixedError):
        tp.build_mixed_domain(2, 2, [(0, 0), (3, 0), (2, 2), (0, 2)])
    with pytest.raises(MixedError):
        tp.build_mixed_domain(2, 2, [(1, 1), (2, 0), (2, 2), (0, 2)])
    with pytest.raises(MixedError, match="counterclockwise"):
        tp.build_mixed_domain(2, 2, [(0, 0), (0, 2), (2, 2), (2, 0)])


def test_centers_nonadjacent_and_corner_degree():
    d = tp.build_mixed_domain(2, 2, corners(2, 2))
    for c in d.class_sites(TYPE_II).tolist() + d.class_sites(TYPE_III).tolist():
        nbrs = d.nbrs[d.indptr[c]:d.indptr[c + 1]]
        assert len(nbrs) == 4
        assert all(d.types[w] == TYPE_I for w in nbrs)


def test_sample_endpoints():
    d = tp.build_mixed_domain(2, 2, corners(2, 2))
    c1 = tp.sample_mixed(d, 1.0, seed=3)
    assert all(c1.bits[i] for i in d.class_sites(TYPE_II))
    assert not any(c1.bits[i] for i in d.class_sites(TYPE_III))
    c0 = tp.sample_mixed(d, 0.0, seed=3)
    assert not any(c0.bits[i] for i in d.class_sites(TYPE_II))
    assert all(c0.bits[i] for i in d.class_sites(TYPE_III))
    assert np.array_equal(tp.sample_mixed(d, 0.4, seed=8).bits,
                          tp.sample_mixed(d, 0.4, seed=8).bits)


def test_sample_q_half_is_homogeneous():
    # at q = 1/2 every site of either center class is open with probability 1/2
    d = tp.build_mixed_domain(3, 3, corners(3, 3))
    hits = np.zeros(d.n_sites)
    trials = 4000
    for t in range(trials):
        hits += tp.sample_mixed(d, 0.5, seed=1, replicate=t).bits
    freq = hits / trials
    assert np.all(np.abs(freq - 0.5) < 4 * np.sqrt(0.25 / trials))


def test_crossing_trivial():
    d = tp.build_mixed_domain(2, 2, corners(2, 2))
    bits = np.ones(d.n_sites, dtype=bool)
    assert tp.crossing_mixed(d, tp.MixedConfig(bits, 1.0, 0, 0))
    # any open chain must use a type-I site: close them all
    bits2 = (d.types != TYPE_I)
    assert not tp.crossing_mixed(d, tp.MixedConfig(bits2, 1.0, 0, 0))


def test_crossing_monotone():
    d = tp.build_mixed_domain(3, 2, corners(3, 2))
    rng = np.random.default_rng(5)
    for _ in range(60):
        bits = rng.random(d.n_sites) < 0.5
        before = tp.crossing_mixed(d, tp.MixedConfig(bits, 0.5, 0, 0))
        closed = np.flatnonzero(~bits)
        if closed.size:
            bits[rng.choice(closed)] = True
        after = tp.crossing_mixed(d, tp.MixedConfig(bits, 0.5, 0, 0))
        assert after or not before


def test_pivotal_1x1_characterization():
    """On the unit square with left/right arcs, the center is pivotal exactly
    when opening it creates the crossing that the two horizontal pairs fail
    to provide."""
    d = tp.build_mixed_domain(1, 1, corners(1, 1))
    s00, s10 = d.site_at(0, 0), d.site_at(1, 0)
    s01, s11 = d.site_at(0, 1), d.site_at(1, 1)
    c = d.center_at(0, 0)
    arcs = d.arc_membership().astype(bool)
    # arcs [A,B] = bottom, [C,D] = top with corner marks
    for bits_int in range(1 << 5):
        bits = np.array([(bits_int >> i) & 1 for i in range(5)], dtype=bool)
        cfg = tp.MixedConfig(bits, 0.5, 0, 0)
        p1, p2, p3 = tp.pivotal_sites(d, cfg)
        piv = p1 | p2 | p3
        direct = (bits[s00] and bits[s01]) or (bits[s10] and bits[s11])
        via_center = (bits[s00] or bits[s10]) and (bits[s01] or bits[s11])
        assert (c in piv) == (not direct and via_center)


def test_pivotal_matches_naive_on_random_configs():
    d = tp.build_mixed_domain(4, 4, corners(4, 4))
    for t in range(150):
        cfg = tp.sample_mixed(d, 0.41, seed=6, replicate=t)
        p1, p2, p3 = tp.pivotal_sites(d, cfg)
        eff = np.zeros(d.n_sites, dtype=bool)
        eff[list(p1 | p2 | p3)] = True
        assert np.array_equal(eff, tp.pivotal_naive(d, cfg))


def test_all_open_single_path_pivotality():
    # all open on a 1-wide strip: every interior column is a cut
    d = tp.build_mixed_domain(1, 3, corners(1, 3))
    bits = np.ones(d.n_sites, dtype=bool)
    p1, p2, p3 = tp.pivotal_sites(d, tp.MixedConfig(bits, 0.5, 0, 0))
    assert not (p1 | p2 | p3)  # two disjoint vertical paths exist


def test_exact_russo_identity_all_small_rectangles():
    for (w, h) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1)]:
        d = tp.build_mixed_domain(w, h, corners(w, h))
        P = tp.exact_polynomial(d, "crossing")
        R = tp.exact_polynomial(d, "russo")
        dP = tp.poly_derivative(P)
        L = max(len(dP), len(R))
        dP = dP + [Fraction(0)] * (L - len(dP))
        R = R + [Fraction(0)] * (L - len(R))
        assert dP == R, (w, h)


def test_exact_polynomial_swap_symmetry():
    d = tp.build_mixed_domain(3, 2, corners(3, 2))
    P = tp.exact_polynomial(d, "crossing")
    Ps = tp.exact_polynomial(d, "crossing", swap_classes=True)
    for k in range(8):
        q = Fraction(k, 7)
        assert tp.poly_eval(Ps, q) == tp.poly_eval(P, 1 - q)


def test_exact_polynomial_budget():
    d = tp.build_mixed_domain(4, 4, corners(4, 4))
    with pytest.raises(MixedError, match="budget"):
        tp.exact_polynomial(d, "crossing")


def test_degenerate_all_marks_coincident_constant_polynomial():
    d = tp.build_mixed_domain(2, 2, [(0, 0)] * 4)
    P = tp.exact_polynomial(d, "crossing")
    assert len(P) == 1 and P[0] == Fraction(1, 2)


def test_degenerate_strip_has_zero_derivative():
    d = tp.build_mixed_domain(3, 0, [(0, 0), (3, 0), (3, 0), (0, 0)])
    assert int((d.types != TYPE_I).sum()) == 0
    est = tp.russo_derivative(d, 0.3, 500, seed=2)
    assert est["estimate"] == 0.0 and est["se"] == 0.0
    res = tp.interpolate(d, [0.0, 0.25, 0.5], 500, seed=2)
    vals = [row["estimate"] for row in res["curve"]]
    assert vals[0] == vals[1] == vals[2]


def test_q0_equals_bond_percolation_exhaustively():
    """Crossing at q=0 equals bond percolation on the covered rectangle, and
    q=1 equals it on the lattice shifted by one step, for every rectangle up
    to 3x2."""
    for (w, h) in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        d = tp.build_mixed_domain(w, h, corners(w, h))
        P = tp.exact_polynomial(d, "crossing")
        arcs = d.arc_membership().astype(bool)
        arc1 = [i for i in np.flatnonzero(arcs[0]) if d.types[i] == TYPE_I]
        arc2 = [i for i in np.flatnonzero(arcs[2]) if d.types[i] == TYPE_I]
        bond_q0 = reference.bond_crossing_probability(w, h, arc1, arc2, d.pos,
                                                      parity=1)
        assert tp.poly_eval(P, Fraction(0)) == bond_q0, (w, h)
        bond_q1 = reference.bond_crossing_probability(w, h, arc1, arc2, d.pos,
                                                      parity=0)
        assert tp.poly_eval(P, Fraction(1)) == bond_q1, (w, h)


def test_russo_mc_matches_exact_derivative():
    d = tp.build_mixed_domain(2, 1, corners(2, 1))
    dP = tp.poly_derivative(tp.exact_polynomial(d, "crossing"))
    for q in (0.2, 0.5):
        est = tp.russo_derivative(d, q, 30000, seed=9)
        exact = float(tp.poly_eval(dP, q))
        assert abs(est["estimate"] - exact) < 3 * est["se"] + 1e-12


def test_interpolate_quadrature_matches_exact():
    d = tp.build_mixed_domain(2, 1, corners(2, 1))
    P = tp.exact_polynomial(d, "crossing")
    res = tp.interpolate(d, [0, 0.1, 0.2, 0.3, 0.4, 0.5], 20000, seed=12)
    exact = float(tp.poly_eval(P, Fraction(1, 2)) - tp.poly_eval(P, Fraction(0)))
    tol = 3 * np.hypot(res["quadrature_se"], res["endpoint_difference_se"])
    assert abs(res["quadrature"] - exact) < 3 * res["quadrature_se"] + 1e-3
    assert abs(res["endpoint_difference"] - res["quadrature"]) < tol + 1e-3


def test_delta_v_zero_shift_is_zero():
    d = tp.build_mixed_domain(4, 3, corners(4, 3))
    v = int(d.class_sites(TYPE_II)[0])
    x, y = d.pos[v]
    v_same = d.center_at(int(x - 0.5), int(y - 0.5))
    assert v_same == v
    # paired difference of a site with itself vanishes identically
    res = tp.delta_v(d, v, 0.5, 300, seed=3)
    assert res["v"] != res["v_shift"]  # the real pairing moves one step right


def test_delta_v_matches_enumeration():
    d = tp.build_mixed_domain(2, 2, corners(2, 2))
    v = int(d.class_sites(TYPE_II)[0])
    x, y = d.pos[v]
    k, l = int(x - 0.5), int(y - 0.5)
    v2 = d.center_at(k + 1, l)
    q = 0.4

    def exact_piv_prob(site):
        total = 0.0
        n = d.n_sites
        for bits_int in range(1 << n):
            bits = np.array([(bits_int >> i) & 1 for i in range(n)], dtype=bool)
            w = 1.0
            for i in range(n):
                pr = {TYPE_I: 0.5, TYPE_II: q, TYPE_III: 1 - q}[int(d.types[i])]
                w *= pr if bits[i] else 1 - pr
            if tp.pivotal_naive(d, tp.MixedConfig(bits, q, 0, 0))[site]:
                total += w
        return total

    exact = exact_piv_prob(v) - exact_piv_prob(v2)
    res = tp.delta_v(d, v, q, 40000, seed=11)
    assert abs(res["estimate"] - exact) < 3 * res["se"] + 1e-12


def test_delta_v_requires_type_II():
    d = tp.build_mixed_domain(3, 3, corners(3, 3))
    with pytest.raises(MixedError):
        tp.delta_v(d, int(d.class_sites(TYPE_I)[0]), 0.5, 10, seed=1)


def test_8x8_endpoint_difference_small():
    """Bond-like (q=0) and homogeneous-site (q=1/2) crossing probabilities on
    a symmetric square differ by a small fraction of either value."""
    d = tp.build_mixed_domain(8, 8, corners(8, 8))
    r0 = tp.estimate_crossing_mixed(d, 0.0, 20000, seed=21)
    rh = tp.estimate_crossing_mixed(d, 0.5, 20000, seed=22)
    gap = abs(rh["estimate"] - r0["estimate"])
    assert gap < 0.05 * min(r0["estimate"], rh["estimate"])
    # both are near one half on a self-dual square
    assert abs(r0["estimate"] - 0.5) < 0.02
    assert abs(rh["estimate"] - 0.5) < 0.02


def test_worker_independence():
    d = tp.build_mixed_domain(4, 4, corners(4, 4))
    a = tp.russo_derivative(d, 0.35, 4096, seed=2, workers=1)
    b = tp.russo_derivative(d, 0.35, 4096, seed=2, workers=4)
    assert a == b
    c1 = tp.estimate_crossing_mixed(d, 0.35, 4096, seed=2, workers=1)
    c3 = tp.estimate_crossing_mixed(d, 0.35, 4096, seed=2, workers=3)
    assert c1 == c3
