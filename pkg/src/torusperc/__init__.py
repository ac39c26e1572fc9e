"""Conformal embeddings of doubly periodic graphs and percolation experiments.

The package computes candidate conformal moduli of genus-1 graphs (balanced
embeddings, random-walk isotropy, circle packings) and runs Monte Carlo and
exact-enumeration percolation experiments against them.
"""

from .graph import (TorusGraph, GraphError, build_torus_graph, builtin, dual,
                    refine_face, covering_graph, read_graph_file,
                    double_dual_is_reversed, BUILTIN_NAMES)
from .embedding import (Embedding, ResourceError, square_embedding, shear,
                        balanced_embedding, barycenter_residual, edge_vector,
                        edge_vectors, sum_squared_edges, face_centroids,
                        dual_edge_vectors, psi, lift_patch, embedding_svg,
                        write_positions_csv)
from .modulus import (CovarianceMatrix, CirclePacking, PackingError, alpha_rw,
                      covariance, monte_carlo_walk_covariance, zeta_defect,
                      pack, alpha_cp, packing_svg, modulus_report_rows)
from .percolation import (DiscreteDomain, DomainError, Configuration,
                          CrossingStats, HFieldEstimate, PAEstimate,
                          ContourIntegral, discretize, discretize_triangulation,
                          site_density, sample_configuration, crossing,
                          crossing_between, crossing_indicators,
                          estimate_crossing, estimate_H, estimate_PA,
                          rotate_edge, rotate_face_edge, contour_sites,
                          contour_integral_H, contour_integral_S,
                          face_edges_inside, pi_ratio, shifted_PA_comparison)
from .mixed import (MixedDomain, MixedConfig, MixedError, build_mixed_domain,
                    sample_mixed, crossing_mixed, pivotal_sites, pivotal_naive,
                    estimate_crossing_mixed, russo_derivative, delta_v,
                    interpolate, exact_polynomial, poly_eval, poly_derivative)

__version__ = "0.1.0"
