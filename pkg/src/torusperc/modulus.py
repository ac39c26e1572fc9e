"""The three modulus solvers for a torus graph.

* ``alpha_rw`` — closed-form root of the isotropy quadratic: the modulus at
  which the lifted simple random walk has a scalar covariance in the scaling
  limit (equivalently, z -> z^2 is discrete-harmonic on average).
* ``alpha_cp`` — the modulus of the doubly periodic circle packing of a torus
  triangulation, from Thurston-style radius iteration plus a developed layout.
* Diagnostics: the per-edge covariance matrix, its Monte Carlo counterpart
  from actual walks, and the pointwise harmonicity defect of z^2.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .graph import TorusGraph, GraphError
from .embedding import Embedding, balanced_embedding, edge_vectors
from .rng import uniform_at, chunk_ranges
from .parallel import map_chunks


class PackingError(RuntimeError):
    """Radius iteration failed to reach the requested angle residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CovarianceMatrix:
    xx: float
    yy: float
    xy: float
    se_xx: Optional[float] = None
    se_yy: Optional[float] = None
    se_xy: Optional[float] = None

    def as_array(self):
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    @property
    def anisotropy(self):
        """|xx - yy| + |xy|; zero exactly at the isotropic modulus."""
        return abs(self.xx - self.yy) + abs(self.xy)


@dataclass(frozen=True)
class CirclePacking:
    triangulation: TorusGraph
    radii: np.ndarray
    layout: np.ndarray          # complex position of one lift per vertex
    periods: tuple              # (1, p2/p1) after normalization
    residual: float             # max |angle sum - 2 pi|
    tangency_error: float       # max |center distance - radius sum|, relative
    holonomy_rotation: float    # deviation of generator holonomies from pure translations


def _quadratic_root(vec):
    """Upper-half-plane root of sum (x_e + alpha y_e)^2 = 0."""
    x, y = vec.real, vec.imag
    a = float(np.sum(y * y))
    b = 2.0 * float(np.sum(x * y))
    c = float(np.sum(x * x))
    if a == 0.0:
        raise GraphError("isotropy quadratic is degenerate: no edge displacement "
                         "crosses the second period (genus-1 invariant violated)")
    disc = 4.0 * a * c - b * b
    if disc <= 0.0:
        raise GraphError("isotropy quadratic has real roots; the embedding is "
                         "not balanced or the graph is degenerate")
    return complex(-b / (2 * a), math.sqrt(disc) / (2 * a))


def alpha_rw(g):
    """Random-walk modulus: the root in H of sum over edges of (e_alpha)^2 = 0.

    Uses the balanced embedding of modulus i (computed on the fly), writes
    each edge vector as ``x_e + alpha y_e`` and solves the real-coefficient
    quadratic in closed form.  The conjugate root is the other solution.
    """
    if isinstance(g, Embedding):
        raise TypeError("alpha_rw expects a TorusGraph; pass embedding.graph")
    em = balanced_embedding(g, 1j)
    return _quadratic_root(edge_vectors(em))


def covariance(em):
    """Per-edge covariance of one walk step in stationarity.

    Averages (Re e)^2, (Im e)^2 and their product over the oriented edges of
    one period; unoriented edges counted once give the same values.
    """
    vec = edge_vectors(em)
    x, y = vec.real, vec.imag
    n = vec.shape[0]
    return CovarianceMatrix(float(np.sum(x * x) / n), float(np.sum(y * y) / n),
                            float(np.sum(x * y) / n))


def zeta_defect(em, z=None):
    """Discrete Laplacian of z -> z^2 at a vertex of a balanced 3-regular embedding.

    Equals one third of the sum of squared edge vectors at the vertex; it is
    zero everywhere only on the regular honeycomb, and sums to zero over one
    period exactly at the random-walk modulus.
    """
    g = em.graph
    if np.any(g.degrees != 3):
        raise GraphError("the z^2 harmonicity defect is defined for 3-regular graphs")
    vec = edge_vectors(em)
    sums = np.zeros(g.nv, dtype=np.complex128)
    np.add.at(sums, g.src, vec * vec)
    sums /= 3.0
    return sums if z is None else complex(sums[z])


# -- Monte Carlo walk ------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _walk_chunk(seed, rep_lo, rep_hi, steps, indptr, vec_re, vec_im, target):
    # returns sums of x^2, y^2, xy and their squares over replicates
    acc = np.zeros(6, dtype=np.float64)
    for rep in range(rep_lo, rep_hi):
        v = 0
        px = 0.0
        py = 0.0
        for k in range(steps):
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            u = uniform_at(np.uint64(seed), np.uint64(rep), np.uint64(k))
            j = lo + min(int(u * deg), deg - 1)
            px += vec_re[j]
            py += vec_im[j]
            v = target[j]
        inv = 1.0 / steps
        xx = px * px * inv
        yy = py * py * inv
        xy = px * py * inv
        acc[0] += xx
        acc[1] += yy
        acc[2] += xy
        acc[3] += xx * xx
        acc[4] += yy * yy
        acc[5] += xy * xy
    return acc


def _halfedge_csr(em):
    g = em.graph
    order = np.argsort(g.src, kind="stable")
    indptr = np.zeros(g.nv + 1, dtype=np.int64)
    np.add.at(indptr, g.src + 1, 1)
    indptr = np.cumsum(indptr)
    vec = edge_vectors(em)[order]
    return indptr, np.ascontiguousarray(vec.real), np.ascontiguousarray(vec.imag), \
        np.ascontiguousarray(g.src[g.twin][order])


def monte_carlo_walk_covariance(em, steps, replicates, seed, workers=1):
    """Empirical covariance of n^{-1/2} Z_n for the lifted simple random walk.

    Replicates are keyed individually by (seed, replicate), so the estimate is
    bit-identical for any worker count.  Agrees with :func:`covariance` within
    a few standard errors once the walk has mixed.
    """
    if replicates <= 0:
        raise ValueError("need at least one replicate")
    indptr, vre, vim, tgt = _halfedge_csr(em)
    chunks = chunk_ranges(replicates)
    parts = map_chunks(
        lambda lo, hi: _walk_chunk(np.uint64(seed), lo, hi, steps, indptr, vre, vim, tgt),
        chunks, workers)
    acc = np.zeros(6)
    for p in parts:
        acc += p
    r = replicates
    mean = acc[:3] / r
    var = np.maximum(acc[3:] / r - mean ** 2, 0.0)
    se = np.sqrt(var / r)
    return CovarianceMatrix(mean[0], mean[1], mean[2], se[0], se[1], se[2])


# -- circle packing --------------------------------------------------------

def _corner_tables(tri):
    """Per corner: (vertex, petal vertex 1, petal vertex 2), grouped by vertex."""
    corners = []
    for cyc in tri.faces:
        v = [int(tri.src[h]) for h in cyc]
        corners.append((v[0], v[1], v[2]))
        corners.append((v[1], v[2], v[0]))
        corners.append((v[2], v[0], v[1]))
    by_vertex = [[] for _ in range(tri.nv)]
    for (a, b, c) in corners:
        by_vertex[a].append((b, c))
    return by_vertex


def _corner_angle(r0, r1, r2):
    return 2.0 * math.atan(math.sqrt((r1 * r2) / (r0 * (r0 + r1 + r2))))


def _angle_sums(radii, by_vertex):
    out = np.empty(len(by_vertex))
    for v, petals in enumerate(by_vertex):
        s = 0.0
        for (b, c) in petals:
            s += _corner_angle(radii[v], radii[b], radii[c])
        out[v] = s
    return out


def pack(tri, tolerance=1e-12, max_iterations=1_000_000):
    """Circle packing of a torus triangulation.

    Radii are iterated with the uniform-petal multiplicative update, sweeping
    vertices in index order, until every angle sum is 2 pi within
    ``tolerance``.  The layout develops triangles through the universal cover
    across a breadth-first tree of face lifts; the holonomies of the two torus
    generators come out as near-pure translations, which are the periods.
    """
    if any(len(c) != 3 for c in tri.faces):
        raise GraphError("pack expects a triangulation (all faces of length 3)")
    if np.any(tri.degrees < 3):
        raise PackingError("degenerate triangulation: vertex of degree < 3")
    by_vertex = _corner_tables(tri)
    radii = np.ones(tri.nv)
    target = 2.0 * math.pi
    sweeps = 0
    while True:
        worst = 0.0
        for v in range(tri.nv):
            k = len(by_vertex[v])
            s = 0.0
            for (b, c) in by_vertex[v]:
                s += _corner_angle(radii[v], radii[b], radii[c])
            worst = max(worst, abs(s - target))
            beta = math.sin(s / (2 * k))
            u_eff = radii[v] * beta / (1.0 - beta)
            delta = math.sin(math.pi / k)
            radii[v] = u_eff * (1.0 - delta) / delta
        radii /= np.exp(np.mean(np.log(radii)))
        sweeps += len(by_vertex)
        if worst < tolerance:
            break
        if sweeps > max_iterations:
            raise PackingError(
                f"radius iteration did not converge (residual {worst:.3e})",
                residual=worst)
    residual = float(np.max(np.abs(_angle_sums(radii, by_vertex) - target)))

    layout, periods, holonomy = _develop_layout(tri, radii)
    scale = periods[0]
    layout = {k: z / scale for k, z in layout.items()}
    radii = radii / abs(scale)
    p2 = periods[1] / scale

    tangency = _tangency_error(tri, radii, layout, (1.0 + 0j, p2))
    base_layout = np.zeros(tri.nv, dtype=np.complex128)
    seen = set()
    for (v, m, n), z in layout.items():
        if v not in seen:
            seen.add(v)
            base_layout[v] = z - m - n * p2
    return CirclePacking(tri, radii, base_layout, (1.0 + 0j, p2), residual,
                         tangency, holonomy / abs(scale))


def _develop_layout(tri, radii, bound=3):
    """Place face lifts across the cover; return positions, periods, rotation error.

    Face orbits walk their face clockwise, so corner triples are laid out with
    negative orientation.
    """
    f0 = 0
    cyc0 = tri.faces[f0]
    pos = {}

    def corner_key(h, t):
        off = tri.face_offset[h]
        return (int(tri.src[h]), int(t[0] + off[0]), int(t[1] + off[1]))

    v0, v1, v2 = (int(tri.src[h]) for h in cyc0)
    r0, r1, r2 = radii[v0], radii[v1], radii[v2]
    pos[corner_key(cyc0[0], (0, 0))] = 0.0 + 0j
    pos[corner_key(cyc0[1], (0, 0))] = complex(r0 + r1, 0.0)
    g0 = _corner_angle(r0, r1, r2)
    pos[corner_key(cyc0[2], (0, 0))] = (r0 + r2) * np.exp(-1j * g0)

    placed = {(f0, 0, 0)}
    queue = [(f0, 0, 0)]
    want = {(f0, 1, 0), (f0, 0, 1)}
    while queue:
        f, tm, tn = queue.pop(0)
        for h in tri.faces[f]:
            th = int(tri.twin[h])
            gf = int(tri.face_of[th])
            shift = tri.face_offset[h] + tri.disp[h] - tri.face_offset[th]
            gm, gn = tm + int(shift[0]), tn + int(shift[1])
            if not (-bound <= gm <= bound and -bound <= gn <= bound):
                continue
            key = (gf, gm, gn)
            if key in placed:
                continue
            placed.add(key)
            _place_third(tri, radii, pos, gf, (gm, gn), corner_key)
            queue.append(key)
    missing = want - placed
    if missing:
        raise PackingError("layout search bound too small for this triangulation")

    # periods: differences between lifts of the same base vertex one generator apart
    p1_samples, p2_samples = [], []
    for (v, m, n), z in pos.items():
        if (v, m + 1, n) in pos:
            p1_samples.append(pos[(v, m + 1, n)] - z)
        if (v, m, n + 1) in pos:
            p2_samples.append(pos[(v, m, n + 1)] - z)
    p1 = np.mean(p1_samples)
    p2 = np.mean(p2_samples)
    rot = max(np.max(np.abs(np.array(p1_samples) - p1)),
              np.max(np.abs(np.array(p2_samples) - p2)))
    return pos, (p1, p2), float(rot)


def _place_third(tri, radii, pos, f, t, corner_key):
    cyc = tri.faces[f]
    keys = [corner_key(h, t) for h in cyc]
    known = [k in pos for k in keys]
    if all(known):
        return
    miss = known.index(False)
    a, b = (miss + 1) % 3, (miss + 2) % 3  # (a, b, miss) stays in cyclic order
    va, vb, vm = (int(tri.src[cyc[j]]) for j in (a, b, miss))
    za, zb = pos[keys[a]], pos[keys[b]]
    ga = _corner_angle(radii[va], radii[vb], radii[vm])
    u = (zb - za) / abs(zb - za)
    pos[keys[miss]] = za + (radii[va] + radii[vm]) * np.exp(-1j * ga) * u
    if sum(known) < 2:
        raise PackingError("layout reached a face with fewer than two placed corners")


def _tangency_error(tri, radii, layout, periods):
    worst = 0.0
    for (v, m, n), z in layout.items():
        for h in np.flatnonzero(tri.src == v):
            w = int(tri.src[tri.twin[h]])
            key = (w, m + int(tri.disp[h, 0]), n + int(tri.disp[h, 1]))
            if key in layout:
                d = abs(layout[key] - z)
                worst = max(worst, abs(d - (radii[v] + radii[w])))
    return worst


def alpha_cp(tri, tolerance=1e-12, max_iterations=1_000_000):
    """Circle-packing modulus of a torus triangulation, normalized into H.

    The ratio of the two generator holonomies of the periodic packing, with
    the generator order fixed by the displacement basis (1,0) then (0,1), and
    a final conjugation when the ratio falls in the lower half-plane.
    """
    packing = pack(tri, tolerance=tolerance, max_iterations=max_iterations)
    alpha = complex(packing.periods[1]) / complex(packing.periods[0])
    if alpha.imag < 0:
        alpha = alpha.conjugate()
    return alpha


# -- artifacts --------------------------------------------------------------

def packing_svg(packing, path, copies=2):
    """Draw the packing's circles and the triangulation edges between centers."""
    from .svg import SvgCanvas
    p1, p2 = packing.periods
    xs, ys = [], []
    for m in range(copies + 1):
        for n in range(copies + 1):
            z = m * p1 + n * p2
            xs.append(z.real)
            ys.append(z.imag)
    pad = float(np.max(packing.radii)) * 2
    canvas = SvgCanvas((min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad))
    tri = packing.triangulation
    for m in range(copies + 1):
        for n in range(copies + 1):
            shift = m * p1 + n * p2
            for h in tri.canonical_edges():
                a = packing.layout[tri.src[h]] + shift
                b = packing.layout[tri.src[tri.twin[h]]] \
                    + (tri.disp[h, 0] * p1 + tri.disp[h, 1] * p2) + shift
                canvas.line(a, b, width=0.5, dashed=True, color="#999")
            for v in range(tri.nv):
                canvas.circle(packing.layout[v] + shift, packing.radii[v], color="#06c")
    canvas.write(path)


def modulus_report_rows(g, tri=None):
    """CSV-ready summary: alpha_rw, alpha_cp, covariance entries, residuals."""
    from .graph import dual
    em = balanced_embedding(g, 1j)
    arws = alpha_rw(g)
    tri = dual(g) if tri is None else tri
    packing = pack(tri)
    acp = alpha_cp(tri)
    cov = covariance(balanced_embedding(g, arws))
    return {
        "alpha_rw_re": arws.real, "alpha_rw_im": arws.imag,
        "alpha_cp_re": acp.real, "alpha_cp_im": acp.imag,
        "cov_xx": cov.xx, "cov_yy": cov.yy, "cov_xy": cov.xy,
        "pack_residual": float(packing.residual),
        "pack_tangency_error": float(packing.tangency_error),
        "pack_holonomy_rotation": float(packing.holonomy_rotation),
    }
