import numpy as np
import pytest

import torusperc as tp
from torusperc.graph import GraphError
from torusperc.modulus import PackingError

SQRT3 = np.sqrt(3.0)


def test_alpha_rw_goldens(T_h, T_s, T_s_refined):
    assert abs(tp.alpha_rw(T_h) - 1j / SQRT3) < 1e-12
    assert abs(tp.alpha_rw(T_s) - 1j) < 1e-12
    assert abs(tp.alpha_rw(T_s_refined) - 1j * np.sqrt(6 / 7)) < 1e-12


def test_alpha_rw_upper_half_plane_and_conjugate_root(T_s_refined):
    a = tp.alpha_rw(T_s_refined)
    assert a.imag > 0
    em = tp.balanced_embedding(T_s_refined, 1j)
    vec = tp.edge_vectors(em)
    x, y = vec.real, vec.imag
    quad = lambda z: np.sum((x + z * y) ** 2)
    assert abs(quad(a)) < 1e-12
    assert abs(quad(a.conjugate())) < 1e-12


def test_alpha_rw_matches_dual(T_h, T_s, T_s_refined):
    for g in (T_h, T_s, T_s_refined):
        assert abs(tp.alpha_rw(g) - tp.alpha_rw(tp.dual(g))) < 1e-10


def test_covariance_scalar_at_isotropic_modulus(T_h, T_s, T_s_refined):
    for g in (T_h, T_s, T_s_refined):
        em = tp.balanced_embedding(g, tp.alpha_rw(g))
        cov = tp.covariance(em)
        assert cov.anisotropy < 1e-12


def test_covariance_honeycomb_square_embedding(T_h):
    cov = tp.covariance(tp.balanced_embedding(T_h, 1j))
    assert abs(cov.xx - 1 / 18) < 1e-14
    assert abs(cov.yy - 1 / 6) < 1e-14
    assert abs(cov.xy) < 1e-14
    assert cov.xx != pytest.approx(cov.yy)


def test_covariance_scaling_homogeneity(T_h):
    em = tp.balanced_embedding(T_h, 0.3 + 0.8j)
    s = 2.5
    scaled = tp.Embedding(em.graph, em.modulus, em.positions * s,
                          (em.periods[0] * s, em.periods[1] * s))
    c1, c2 = tp.covariance(em), tp.covariance(scaled)
    assert np.allclose([c2.xx, c2.yy, c2.xy],
                       [s * s * c1.xx, s * s * c1.yy, s * s * c1.xy])


def test_zeta_defect(T_h, T_s):
    em = tp.balanced_embedding(T_h, 1j * SQRT3 / 3)
    assert np.abs(tp.zeta_defect(em)).max() < 1e-12
    # on average zero exactly at the isotropic modulus
    for g in (T_h, T_s):
        em = tp.balanced_embedding(g, tp.alpha_rw(g))
        assert abs(tp.zeta_defect(em).sum()) < 1e-12
    em_s = tp.balanced_embedding(T_s, 1j)
    assert np.abs(tp.zeta_defect(em_s)).max() > 0.01
    with pytest.raises(GraphError):
        tp.zeta_defect(tp.square_embedding(tp.builtin("Z2_bond")))


def test_walk_covariance_agrees_with_formula(T_h):
    em = tp.balanced_embedding(T_h, tp.alpha_rw(T_h))
    exact = tp.covariance(em)
    est = tp.monte_carlo_walk_covariance(em, steps=2000, replicates=3000, seed=11)
    assert abs(est.xx - exact.xx) < 4 * est.se_xx
    assert abs(est.yy - exact.yy) < 4 * est.se_yy
    assert abs(est.xy - exact.xy) < 4 * est.se_xy


def test_walk_single_step_distribution(T_h):
    # one step from vertex 0: uniform over its three edges
    em = tp.balanced_embedding(T_h, 1j)
    vec = tp.edge_vectors(em)
    at0 = vec[np.flatnonzero(em.graph.src == 0)]
    xx = np.mean(at0.real ** 2)
    est = tp.monte_carlo_walk_covariance(em, steps=1, replicates=4000, seed=5)
    assert abs(est.xx - xx) < 4 * est.se_xx


def test_walk_determinism_and_errors(T_h):
    em = tp.balanced_embedding(T_h, 1j)
    a = tp.monte_carlo_walk_covariance(em, steps=100, replicates=2000, seed=3)
    b = tp.monte_carlo_walk_covariance(em, steps=100, replicates=2000, seed=3)
    assert a == b
    c = tp.monte_carlo_walk_covariance(em, steps=100, replicates=2000, seed=3,
                                       workers=4)
    assert a == c
    with pytest.raises(ValueError):
        tp.monte_carlo_walk_covariance(em, steps=10, replicates=0, seed=1)


def test_pack_centered_square(T_s):
    packing = tp.pack(tp.dual(T_s))
    assert packing.residual < 1e-10
    radii = np.sort(packing.radii)
    assert radii[0] != pytest.approx(radii[1])  # two circle sizes
    assert packing.tangency_error < 1e-10
    assert packing.holonomy_rotation < 1e-8


def test_pack_honeycomb_equal_radii(T_h):
    packing = tp.pack(tp.dual(T_h))
    assert np.ptp(packing.radii) < 1e-12


def test_pack_refined_keeps_original_circles(T_s):
    tri = tp.dual(T_s)
    base = tp.pack(tri)
    refined = tp.pack(tp.refine_face(tri, 0))  # original vertex ids preserved
    # same circles up to global scale, one disc added
    assert refined.radii.size == base.radii.size + 1
    ratio = refined.radii[0] / base.radii[0]
    np.testing.assert_allclose(refined.radii[:base.radii.size],
                               base.radii * ratio, rtol=1e-9)
    assert refined.radii[-1] < refined.radii[:-1].min()


def test_pack_non_convergence_error(T_s_refined):
    with pytest.raises(PackingError) as info:
        tp.pack(tp.dual(T_s_refined), max_iterations=1)
    assert info.value.residual is not None


def test_pack_rejects_non_triangulation(T_s):
    with pytest.raises(GraphError):
        tp.pack(T_s)


def test_alpha_cp_goldens(T_h, T_s, T_s_refined):
    assert abs(tp.alpha_cp(tp.dual(T_s)) - 1j) < 1e-8
    assert abs(tp.alpha_cp(tp.dual(T_s_refined)) - 1j) < 1e-8
    assert abs(tp.alpha_cp(tp.dual(T_h)) - 1j / SQRT3) < 1e-8


def test_alpha_cp_refinement_invariance(T_h, T_s, T_s_refined):
    for g in (T_h, T_s, T_s_refined):
        tri = tp.dual(g)
        a0 = tp.alpha_cp(tri)
        for face in range(tri.nf):
            assert abs(tp.alpha_cp(tp.refine_face(tri, face)) - a0) < 1e-8


def test_modulus_report(T_s_refined):
    row = tp.modulus_report_rows(T_s_refined)
    assert abs(row["alpha_rw_im"] - np.sqrt(6 / 7)) < 1e-10
    assert abs(row["alpha_cp_im"] - 1.0) < 1e-8
    assert row["pack_residual"] < 1e-10


def test_packing_svg(tmp_path, T_s):
    packing = tp.pack(tp.dual(T_s))
    path = tmp_path / "pack.svg"
    tp.packing_svg(packing, path)
    assert path.read_text().startswith("<svg")
