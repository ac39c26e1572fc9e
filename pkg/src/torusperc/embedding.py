"""Plane embeddings of torus graphs: shears, balanced layouts, edge fields.

An :class:`Embedding` assigns one complex position per vertex together with
the pair of period vectors ``(1, modulus)``.  Lifting a half-edge with
displacement ``(m, n)`` moves by ``m + n * modulus`` between fundamental
domains, so edge vectors never depend on the lift chosen.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .graph import TorusGraph, GraphError, ROLE_PRIMAL, dual

TAU = np.exp(2j * np.pi / 3)


class ResourceError(RuntimeError):
    """A request would exceed the configured memory budget."""


@dataclass(frozen=True)
class Embedding:
    graph: TorusGraph
    modulus: complex
    positions: np.ndarray  # complex, one chosen lift per vertex
    periods: tuple         # (p1, p2), kept equal to (1, modulus)

    def __post_init__(self):
        if self.modulus.imag == 0:
            raise GraphError("embedding modulus must have nonzero imaginary part")

    def period_of(self, mn):
        return mn[..., 0] * self.periods[0] + mn[..., 1] * self.periods[1]


def square_embedding(g):
    """The embedding pulled back from the a-priori torus coordinates (modulus i)."""
    if g.positions is None:
        raise GraphError("square embedding needs a-priori torus positions")
    z = g.positions[:, 0] + 1j * g.positions[:, 1]
    return Embedding(g, 1j, z, (1.0 + 0j, 1j))


def shear(em, beta):
    """Apply the real-linear map sending 1 to 1 and i to ``beta``.

    ``shear(square_embedding(g), a)`` has modulus ``a``, and shearing by
    ``beta`` then ``beta2`` equals a single shear by ``beta2`` applied to
    ``beta`` (the maps compose that way).
    """
    beta = complex(beta)
    if beta.imag == 0:
        raise GraphError("shear by a real number is degenerate")
    phi = lambda z: np.real(z) + beta * np.imag(z)
    return Embedding(em.graph, phi(em.modulus), phi(em.positions),
                     (phi(em.periods[0]), phi(em.periods[1])))


def balanced_embedding(g, alpha=1j):
    """The embedding of modulus ``alpha`` with every vertex at the barycenter
    of its neighbors, vertex 0 pinned at the origin.

    Solves the sparse barycenter system directly; for a connected graph the
    pinned system is nonsingular, so failure is reported as an internal error.
    """
    alpha = complex(alpha)
    if alpha.imag == 0:
        raise GraphError("modulus must have nonzero imaginary part")
    n = g.nv
    rows, cols, vals = [], [], []
    rhs = np.zeros(n, dtype=np.complex128)
    deg = g.degrees
    for h in range(g.nh):
        u = int(g.src[h])
        v = int(g.src[g.twin[h]])
        if u == 0:
            continue
        rows.append(u); cols.append(v); vals.append(-1.0)
        rhs[u] += g.disp[h, 0] + alpha * g.disp[h, 1]
    for v in range(1, n):
        rows.append(v); cols.append(v); vals.append(float(deg[v]))
    rows.append(0); cols.append(0); vals.append(1.0)
    lap = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.complex128)
    z = scipy.sparse.linalg.spsolve(lap, rhs)
    if not np.all(np.isfinite(z)):
        raise RuntimeError("internal error: singular barycenter system on a connected graph")
    return Embedding(g, alpha, z, (1.0 + 0j, alpha))


def barycenter_residual(em):
    """Max distance between a vertex and the barycenter of its neighbor lifts."""
    vec = edge_vectors(em)
    sums = np.zeros(em.graph.nv, dtype=np.complex128)
    np.add.at(sums, em.graph.src, vec)
    return float(np.max(np.abs(sums / em.graph.degrees)))


def edge_vector(em, h):
    """Complex displacement across half-edge ``h``, independent of the lift."""
    g = em.graph
    return complex(em.positions[g.src[g.twin[h]]]
                   + g.disp[h, 0] * em.periods[0] + g.disp[h, 1] * em.periods[1]
                   - em.positions[g.src[h]])


def edge_vectors(em):
    """Edge vectors of all half-edges at once."""
    g = em.graph
    return (em.positions[g.src[g.twin]]
            + g.disp[:, 0] * em.periods[0] + g.disp[:, 1] * em.periods[1]
            - em.positions[g.src])


def sum_squared_edges(em):
    """S2: the sum of squared edge lengths over one period (unoriented edges)."""
    vec = edge_vectors(em)
    return float(np.sum(np.abs(vec[em.graph.canonical_edges()]) ** 2))


def face_centroids(em):
    """Centroid of each face's corner lifts, in embedding coordinates.

    This is where the induced dual embedding places its vertices; swap in
    circumcenters here if a different dual placement is ever needed.
    """
    g = em.graph
    corner = em.positions[g.src] + em.period_of(g.face_offset.astype(np.float64))
    cen = np.zeros(g.nf, dtype=np.complex128)
    for fid, cyc in enumerate(g.faces):
        cen[fid] = corner[cyc].mean()
    return cen


def dual_edge_vectors(em):
    """Vector of the dual half-edge crossing each primal half-edge.

    Dual half-edge ``h*`` runs from the face right of ``h`` to the face left
    of ``h`` (so the angle from ``h`` to ``h*`` is a positive turn), between
    the induced dual vertices at the face centroids.
    """
    g = em.graph
    dg = dual(g)
    cen = face_centroids(em)
    return (cen[dg.src[dg.twin]] + em.period_of(dg.disp.astype(np.float64))
            - cen[dg.src])


def psi(em, h=None):
    """Local deviation of a 3-regular embedding from equilateral dual faces.

    ``psi(e) = e* + tau (tau.e)* + tau^2 (tau^2.e)*`` with ``tau.e`` the next
    edge counterclockwise at the source of ``e`` and starred edges read as
    complex numbers.  Vanishes identically exactly when all induced dual faces
    are equilateral triangles.  Returns the full per-half-edge array when
    ``h`` is None.
    """
    g = em.graph
    if g.role != ROLE_PRIMAL and np.any(g.degrees != 3):
        raise GraphError("psi is defined for 3-regular primal graphs only")
    dvec = dual_edge_vectors(em)
    out = dvec + TAU * dvec[g.nxt] + TAU ** 2 * dvec[g.nxt[g.nxt]]
    return out if h is None else complex(out[h])


def lift_patch(em, window, max_lifts=5_000_000):
    """All vertex lifts with position in the half-open box ``window``.

    ``window`` is ``(xmin, xmax, ymin, ymax)``; a lift is kept when
    ``xmin <= x < xmax`` and ``ymin <= y < ymax``.  Enumeration order is
    (m, n, base vertex) ascending.  Returns ``(lifts, pos)`` where ``lifts``
    is an (L, 3) int array of ``(base, m, n)`` and ``pos`` the complex
    positions.
    """
    xmin, xmax, ymin, ymax = map(float, window)
    if not (xmin < xmax and ymin < ymax):
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.complex128)
    p1, p2 = complex(em.periods[0]), complex(em.periods[1])
    basis = np.array([[p1.real, p2.real], [p1.imag, p2.imag]])
    inv = np.linalg.inv(basis)
    corners = np.array([[xmin, ymin], [xmin, ymax], [xmax, ymin], [xmax, ymax]]).T
    mn = inv @ corners
    spread = np.abs(inv @ np.array([em.positions.real, em.positions.imag])).max(axis=1)
    m_lo = int(np.floor(mn[0].min() - spread[0])) - 1
    m_hi = int(np.ceil(mn[0].max() + spread[0])) + 1
    n_lo = int(np.floor(mn[1].min() - spread[1])) - 1
    n_hi = int(np.ceil(mn[1].max() + spread[1])) + 1
    count = (m_hi - m_lo + 1) * (n_hi - n_lo + 1) * em.graph.nv
    if count > max_lifts:
        raise ResourceError(
            f"window would enumerate {count} candidate lifts (budget {max_lifts})")
    ms = np.arange(m_lo, m_hi + 1)
    ns = np.arange(n_lo, n_hi + 1)
    mm, nn, vv = np.meshgrid(ms, ns, np.arange(em.graph.nv), indexing="ij")
    pos = em.positions[vv] + mm * p1 + nn * p2
    keep = ((pos.real >= xmin) & (pos.real < xmax)
            & (pos.imag >= ymin) & (pos.imag < ymax))
    lifts = np.stack([vv[keep], mm[keep], nn[keep]], axis=1).astype(np.int64)
    return lifts, pos[keep]


# -- artifacts ------------------------------------------------------------

def write_positions_csv(em, path):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y"])
        for v, z in enumerate(em.positions):
            w.writerow([v, repr(z.real), repr(z.imag)])


def embedding_svg(em, window, path, show_dual=True):
    """Render a patch of the embedding (and its induced dual, dashed) as SVG."""
    from .svg import SvgCanvas
    lifts, pos = lift_patch(em, window)
    canvas = SvgCanvas(window)
    g = em.graph
    index = {(int(b), int(m), int(n)): k for k, (b, m, n) in enumerate(lifts)}
    vec = edge_vectors(em)
    for k, (b, m, n) in enumerate(lifts):
        for h in np.flatnonzero(g.src == b):
            canvas.line(pos[k], pos[k] + vec[h], width=0.6)
    if show_dual:
        cen = face_centroids(em)
        dvec = dual_edge_vectors(em)
        dg = dual(g)
        for m in range(int(lifts[:, 1].min()), int(lifts[:, 1].max()) + 1):
            for n in range(int(lifts[:, 2].min()), int(lifts[:, 2].max()) + 1):
                shiftz = m * em.periods[0] + n * em.periods[1]
                for h in range(g.nh):
                    a = cen[dg.src[h]] + shiftz
                    canvas.line(a, a + dvec[h], width=0.4, dashed=True, color="#888")
    for k in range(len(lifts)):
        canvas.circle(pos[k], 0.01 * canvas.scale_hint, fill="#000")
    canvas.write(path)
