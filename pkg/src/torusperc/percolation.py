"""Site percolation on embedded triangulations cut to a plane domain.

A :class:`DiscreteDomain` is the largest connected component of the site
lattice (the dual triangulation of a 3-regular embedding, scaled by the mesh)
inside a polygon, with its counterclockwise boundary walk and marked boundary
sites.  Everything downstream is a pure function of the domain, a seed and a
trial count: crossings, the three crossing-separation fields H_A, H_B, H_C,
their increments along edges, discrete contour integrals, and incipient-ratio
diagnostics.

Event conventions (exercised both ways by the brute-force oracle in the test
suite): the separating path may use boundary sites; a site belonging to a
separating cluster counts as separated unless it lies on the opposite arc;
a site is on the corner side only when its residual region touches one of
the two corner-adjacent arcs, so pockets fully enclosed by a cluster count
for no corner.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
import shapely
from shapely.geometry import Polygon, Point

from .graph import dual
from .embedding import Embedding, face_centroids
from .rng import (philox2x64, stream_key, site_codes, lift_code, chunk_ranges,
                  fill_uniforms)
from .parallel import map_chunks

_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@numba.njit(numba.int64(numba.int64[:], numba.int64), cache=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True, inline="always")
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra != rb:
        parent[rb] = ra


@numba.njit(cache=True, nogil=True)
def _fill_states(key, codes, p, states):
    for i in range(codes.shape[0]):
        x0, _ = philox2x64(codes[i], np.uint64(0), key)
        states[i] = np.float64(x0 >> np.uint64(11)) * _INV53 < p


@numba.njit(cache=True, nogil=True)
def _crossing_single(states, eu, ev, arc1, arc2):
    n = states.shape[0]
    parent = np.empty(n + 2, dtype=np.int64)
    for i in range(n + 2):
        parent[i] = i
    va, vb = n, n + 1
    for k in arc1:
        if states[k]:
            _union(parent, va, k)
    for k in arc2:
        if states[k]:
            _union(parent, vb, k)
    for j in range(eu.shape[0]):
        if states[eu[j]] and states[ev[j]]:
            _union(parent, eu[j], ev[j])
    return _find(parent, va) == _find(parent, vb)


@numba.njit(cache=True, nogil=True)
def _crossing_trials(seed, lo, hi, codes, p, eu, ev, arc1, arc2):
    n = codes.shape[0]
    out = np.zeros(hi - lo, dtype=np.uint8)
    states = np.empty(n, dtype=np.bool_)
    for rep in range(lo, hi):
        key = stream_key(np.uint64(seed), np.uint64(rep))
        _fill_states(key, codes, p, states)
        if _crossing_single(states, eu, ev, arc1, arc2):
            out[rep - lo] = 1
    return out


@numba.njit(cache=True, nogil=True)
def _h_chunk(seed, lo, hi, codes, p, eu, ev, in_arc, fc, q_eu, q_ev, qf_src, qf_tgt):
    """Separation-event counts per site and per face (triangle of sites ``fc``),
    plus increment counts along query site edges and query face pairs, over one
    replicate range."""
    n = codes.shape[0]
    nf = fc.shape[0]
    counts = np.zeros((3, n), dtype=np.int64)
    fcounts = np.zeros((3, nf), dtype=np.int64)
    inc = np.zeros((3, q_eu.shape[0]), dtype=np.int64)
    finc = np.zeros((3, qf_src.shape[0]), dtype=np.int64)
    states = np.empty(n, dtype=np.bool_)
    parent = np.empty(n, dtype=np.int64)
    parent2 = np.empty(n, dtype=np.int64)
    touch = np.empty((3, n), dtype=np.uint8)
    qual = np.empty(n, dtype=np.bool_)
    reach_tgt = np.empty(n, dtype=np.uint8)
    reach_adj = np.empty(n, dtype=np.uint8)
    ev_sites = np.empty((3, n), dtype=np.uint8)
    ev_faces = np.empty((3, nf), dtype=np.uint8)
    for rep in range(lo, hi):
        key = stream_key(np.uint64(seed), np.uint64(rep))
        _fill_states(key, codes, p, states)
        for i in range(n):
            parent[i] = i
        for j in range(eu.shape[0]):
            if states[eu[j]] and states[ev[j]]:
                _union(parent, eu[j], ev[j])
        for a in range(3):
            for i in range(n):
                touch[a, i] = 0
        for i in range(n):
            if states[i]:
                r = _find(parent, i)
                for a in range(3):
                    if in_arc[a, i]:
                        touch[a, r] = 1
        for X in range(3):
            a1 = (X + 2) % 3   # arc before the corner (CA for A)
            a2 = X             # arc after the corner (AB for A)
            tgt = (X + 1) % 3  # opposite arc (BC for A)
            for i in range(n):
                if states[i]:
                    r = _find(parent, i)
                    qual[i] = touch[a1, r] == 1 and touch[a2, r] == 1
                else:
                    qual[i] = False
            # residual regions once the separating clusters are removed: the
            # corner side touches the two adjacent arcs, the far side touches
            # the opposite arc, and pockets enclosed by a cluster touch nothing
            for i in range(n):
                parent2[i] = i
            for j in range(eu.shape[0]):
                if not qual[eu[j]] and not qual[ev[j]]:
                    _union(parent2, eu[j], ev[j])
            for i in range(n):
                reach_tgt[i] = 0
                reach_adj[i] = 0
            for i in range(n):
                if not qual[i]:
                    if in_arc[tgt, i]:
                        reach_tgt[_find(parent2, i)] = 1
                    if in_arc[a1, i] or in_arc[a2, i]:
                        reach_adj[_find(parent2, i)] = 1
            for i in range(n):
                if qual[i]:
                    # a site of a separating cluster lies on the corner side
                    # of everything except the opposite arc
                    ev_sites[X, i] = 0 if in_arc[tgt, i] else 1
                else:
                    r = _find(parent2, i)
                    ev_sites[X, i] = 1 if (reach_tgt[r] == 0 and reach_adj[r] == 1) else 0
            for i in range(n):
                counts[X, i] += ev_sites[X, i]
            # a face is separated when no corner sits on or reaches the
            # opposite arc and some corner lies on the corner side
            for k in range(nf):
                e = 1
                anchored = False
                for c in range(3):
                    i = fc[k, c]
                    if in_arc[tgt, i]:
                        e = 0
                        break
                    if qual[i]:
                        anchored = True
                    else:
                        r = _find(parent2, i)
                        if reach_tgt[r] == 1:
                            e = 0
                            break
                        if reach_adj[r] == 1:
                            anchored = True
                if not anchored:
                    e = 0
                ev_faces[X, k] = e
                fcounts[X, k] += e
        for q in range(q_eu.shape[0]):
            for X in range(3):
                if ev_sites[X, q_ev[q]] == 1 and ev_sites[X, q_eu[q]] == 0:
                    inc[X, q] += 1
        for q in range(qf_src.shape[0]):
            for X in range(3):
                if ev_faces[X, qf_tgt[q]] == 1 and ev_faces[X, qf_src[q]] == 0:
                    finc[X, q] += 1
    return counts, fcounts, inc, finc


# ---------------------------------------------------------------------------
# domain construction
# ---------------------------------------------------------------------------

class DomainError(ValueError):
    """The requested discretization is empty or inconsistent."""


@dataclass
class DiscreteDomain:
    sites: np.ndarray           # (L, 3) int: (base vertex, m, n)
    pos: np.ndarray             # complex positions
    indptr: np.ndarray          # CSR adjacency in lattice rotation order
    nbrs: np.ndarray
    nbr_halfedge: np.ndarray    # base dual half-edge id of each CSR entry
    edges_u: np.ndarray         # each lattice edge once, for union-find
    edges_v: np.ndarray
    boundary_cycle: np.ndarray  # site indices along the ccw outer walk
    marks: np.ndarray           # walk indices of A, B, C(, D)
    mesh: float
    domain_shape: Polygon
    codes: np.ndarray           # uint64 RNG counter code per site
    # triangles with all three corner sites present: these are the lifts of
    # the 3-regular primal's vertices, where the paper's fields naturally live
    face_corners: np.ndarray = None   # (K, 3) site indices
    face_pos: np.ndarray = None       # complex centroids
    face_lift: np.ndarray = None      # (K, 3): (site-graph face id, m, n)
    face_nbr: np.ndarray = None       # (K, 3) adjacent face or -1, in orbit order
    face_nbr_halfedge: np.ndarray = None  # (K, 3) primal half-edge id of each step
    base_embedding: Optional[Embedding] = None
    site_graph: object = None   # the triangulation whose lifts are the sites

    @property
    def n_sites(self):
        return self.sites.shape[0]

    @property
    def n_faces(self):
        return 0 if self.face_corners is None else self.face_corners.shape[0]

    @property
    def is_boundary(self):
        out = np.zeros(self.n_sites, dtype=bool)
        out[self.boundary_cycle] = True
        return out

    def mark_sites(self):
        return self.boundary_cycle[self.marks]

    def arc_membership(self):
        """(K, n) booleans: site lies on the closed walk arc from mark k to mark k+1."""
        k = len(self.marks)
        out = np.zeros((k, self.n_sites), dtype=np.uint8)
        cyc = self.boundary_cycle
        L = len(cyc)
        for a in range(k):
            i, j = self.marks[a], self.marks[(a + 1) % k]
            t = i
            while True:
                out[a, cyc[t]] = 1
                if t == j:
                    break
                t = (t + 1) % L
        return out

    def arc_sites(self, a):
        return np.flatnonzero(self.arc_membership()[a])

    def site_index(self, base, m, n):
        key = (int(base), int(m), int(n))
        if not hasattr(self, "_index"):
            self._index = {(int(b), int(mm), int(nn)): k
                           for k, (b, mm, nn) in enumerate(self.sites)}
        if key not in self._index:
            raise DomainError(f"site {key} is not in the domain")
        return self._index[key]

    def face_index(self, face_id, m, n):
        key = (int(face_id), int(m), int(n))
        if not hasattr(self, "_findex"):
            self._findex = {(int(f), int(mm), int(nn)): k
                            for k, (f, mm, nn) in enumerate(self.face_lift)}
        if key not in self._findex:
            raise DomainError(f"face {key} is not in the domain")
        return self._findex[key]


def _polygon(points):
    if isinstance(points, Polygon):
        return points
    pts = [(complex(p).real, complex(p).imag) for p in points]
    poly = Polygon(pts)
    if not poly.is_valid or poly.area <= 0:
        raise DomainError("domain polygon is not a simple positive-area polygon")
    return poly


def discretize(em, polygon, delta, marks, codes="index"):
    """Cut the site lattice of a primal embedding to a polygon at mesh ``delta``.

    Sites are the lifts of the induced dual vertices (face centroids of ``em``)
    scaled by ``delta``; only the largest connected component inside the
    polygon is kept.  ``marks`` are points on the polygon boundary, listed
    counterclockwise; each snaps to the nearest boundary site (ties to the
    lowest site id).  ``codes`` selects RNG counter codes: ``"index"`` (default)
    or ``"lift"`` for couplings between overlapping domains.
    """
    site_graph = dual(em.graph)
    cen = face_centroids(em)
    tri_em = Embedding(site_graph, em.modulus, cen, em.periods)
    return discretize_triangulation(tri_em, polygon, delta, marks, codes=codes)


def discretize_triangulation(tri_em, polygon, delta, marks, codes="index"):
    """Like :func:`discretize` but with the site triangulation embedded directly."""
    poly = _polygon(polygon)
    delta = float(delta)
    if delta <= 0:
        raise DomainError("mesh must be positive")
    g = tri_em.graph
    p1, p2 = complex(tri_em.periods[0]) * delta, complex(tri_em.periods[1]) * delta
    base = tri_em.positions * delta

    minx, miny, maxx, maxy = poly.bounds
    basis = np.array([[p1.real, p2.real], [p1.imag, p2.imag]])
    inv = np.linalg.inv(basis)
    corners = np.array([[minx, miny], [minx, maxy], [maxx, miny], [maxx, maxy]]).T
    mn = inv @ corners
    spread = np.abs(inv @ np.array([base.real, base.imag])).max(axis=1)
    m_lo, m_hi = int(np.floor(mn[0].min() - spread[0])) - 1, int(np.ceil(mn[0].max() + spread[0])) + 1
    n_lo, n_hi = int(np.floor(mn[1].min() - spread[1])) - 1, int(np.ceil(mn[1].max() + spread[1])) + 1
    ms = np.arange(m_lo, m_hi + 1)
    ns = np.arange(n_lo, n_hi + 1)
    mm, nn, vv = np.meshgrid(ms, ns, np.arange(g.nv), indexing="ij")
    mm, nn, vv = mm.ravel(), nn.ravel(), vv.ravel()
    pos = base[vv] + mm * p1 + nn * p2
    keep = shapely.contains_xy(poly, pos.real, pos.imag)
    if not keep.any():
        raise DomainError("the polygon contains no lattice site at this mesh")
    sites = np.stack([vv[keep], mm[keep], nn[keep]], axis=1).astype(np.int64)
    pos = pos[keep]
    order = np.lexsort((sites[:, 0], sites[:, 2], sites[:, 1]))  # by (m, n, base)
    sites, pos = sites[order], pos[order]

    index = {(int(b), int(m), int(n)): k for k, (b, m, n) in enumerate(sites)}
    rotation = [g.vertex_halfedges(v) for v in range(g.nv)]
    indptr = [0]
    nbrs, nbr_he = [], []
    for k, (b, m, n) in enumerate(sites):
        for h in rotation[int(b)]:
            w = index.get((int(g.src[g.twin[h]]), int(m + g.disp[h, 0]),
                           int(n + g.disp[h, 1])))
            if w is not None:
                nbrs.append(w)
                nbr_he.append(h)
        indptr.append(len(nbrs))
    indptr = np.array(indptr, dtype=np.int64)
    nbrs = np.array(nbrs, dtype=np.int64)
    nbr_he = np.array(nbr_he, dtype=np.int64)

    comp = _largest_component(len(sites), indptr, nbrs)
    if comp.size < len(sites):
        remap = np.full(len(sites), -1, dtype=np.int64)
        remap[comp] = np.arange(comp.size)
        sites, pos = sites[comp], pos[comp]
        new_indptr = [0]
        new_nbrs, new_he = [], []
        for k in comp:
            for s in range(indptr[k], indptr[k + 1]):
                if remap[nbrs[s]] >= 0:
                    new_nbrs.append(remap[nbrs[s]])
                    new_he.append(nbr_he[s])
            new_indptr.append(len(new_nbrs))
        indptr = np.array(new_indptr, dtype=np.int64)
        nbrs = np.array(new_nbrs, dtype=np.int64)
        nbr_he = np.array(new_he, dtype=np.int64)

    eu, ev = [], []
    for k in range(len(sites)):
        for s in range(indptr[k], indptr[k + 1]):
            if k < nbrs[s]:
                eu.append(k)
                ev.append(nbrs[s])
    eu = np.array(eu, dtype=np.int64)
    ev = np.array(ev, dtype=np.int64)

    walk = _outer_walk(pos, indptr, nbrs)
    mark_idx = _snap_marks(poly, pos, walk, marks)

    if codes == "index":
        code_arr = site_codes(len(sites))
    elif codes == "lift":
        code_arr = np.array([lift_code(m, n, b) for b, m, n in sites], dtype=np.uint64)
    else:
        raise DomainError(f"unknown code scheme {codes!r}")

    fcorners, fpos, flift, fnbr, fnbr_he = _build_faces(g, sites, pos)

    return DiscreteDomain(sites, pos, indptr, nbrs, nbr_he, eu, ev, walk,
                          mark_idx, delta, poly, code_arr,
                          face_corners=fcorners, face_pos=fpos, face_lift=flift,
                          face_nbr=fnbr, face_nbr_halfedge=fnbr_he,
                          base_embedding=tri_em, site_graph=g)


def _build_faces(g, sites, pos):
    """Lifts of the site graph's triangular faces whose corners are all present.

    These are the vertices of the 3-regular primal inside the domain; corner
    and neighbor order follow the face orbit.  Stepping to the j-th neighbor
    crosses the primal half-edge recorded alongside.
    """
    site_of = {(int(b), int(m), int(n)): k for k, (b, m, n) in enumerate(sites)}
    m_lo, m_hi = int(sites[:, 1].min()) - 2, int(sites[:, 1].max()) + 2
    n_lo, n_hi = int(sites[:, 2].min()) - 2, int(sites[:, 2].max()) + 2
    face_ids = {}
    fcorners, flift, fpos = [], [], []
    for fid, cyc in enumerate(g.faces):
        if len(cyc) != 3:
            continue
        cors = [(int(g.src[k]), g.face_offset[k]) for k in cyc]
        for m in range(m_lo, m_hi + 1):
            for n in range(n_lo, n_hi + 1):
                idxs = []
                for b, off in cors:
                    w = site_of.get((b, m + int(off[0]), n + int(off[1])))
                    if w is None:
                        break
                    idxs.append(w)
                if len(idxs) == 3:
                    face_ids[(fid, m, n)] = len(fcorners)
                    fcorners.append(idxs)
                    flift.append((fid, m, n))
                    fpos.append(pos[idxs].mean())
    k = len(fcorners)
    fnbr = np.full((k, 3), -1, dtype=np.int64)
    fnbr_he = np.full((k, 3), -1, dtype=np.int64)
    for i, (fid, m, n) in enumerate(flift):
        cyc = g.faces[fid]
        for j, kh in enumerate(cyc):
            kh = int(kh)
            g2 = int(g.face_of[g.twin[kh]])
            sh = g.face_offset[kh] + g.disp[kh] - g.face_offset[g.twin[kh]]
            other = face_ids.get((g2, m + int(sh[0]), n + int(sh[1])))
            if other is not None:
                fnbr[i, j] = other
                fnbr_he[i, j] = int(g.twin[kh])
    return (np.array(fcorners, dtype=np.int64).reshape(-1, 3),
            np.array(fpos, dtype=np.complex128),
            np.array(flift, dtype=np.int64).reshape(-1, 3), fnbr, fnbr_he)


def _largest_component(n, indptr, nbrs):
    comp = np.full(n, -1, dtype=np.int64)
    sizes = []
    for start in range(n):
        if comp[start] >= 0:
            continue
        cid = len(sizes)
        stack = [start]
        comp[start] = cid
        size = 0
        while stack:
            x = stack.pop()
            size += 1
            for s in range(indptr[x], indptr[x + 1]):
                w = nbrs[s]
                if comp[w] < 0:
                    comp[w] = cid
                    stack.append(w)
        sizes.append(size)
    best = int(np.argmax(sizes))  # first max: deterministic
    return np.flatnonzero(comp == best)


def _outer_walk(pos, indptr, nbrs):
    """Counterclockwise closed walk around the outer face of the site subgraph."""
    n = pos.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    # twin slots: match the s-th (u->v) entry with the corresponding (v->u) entry
    twin_slot = np.empty(nbrs.shape[0], dtype=np.int64)
    pending = {}
    for u in range(n):
        for s in range(indptr[u], indptr[u + 1]):
            v = int(nbrs[s])
            back = pending.get((v, u))
            if back:
                t = back.pop(0)
                twin_slot[s] = t
                twin_slot[t] = s
            else:
                pending.setdefault((u, v), []).append(s)
    start = int(np.lexsort((pos.real, pos.imag))[0])
    ang = np.angle(pos[nbrs[indptr[start]:indptr[start + 1]]] - pos[start])
    slot0 = int(indptr[start] + np.argmax(ang))
    walk = []
    u, s = start, slot0
    while True:
        walk.append(u)
        v = int(nbrs[s])
        t = twin_slot[s]
        deg = indptr[v + 1] - indptr[v]
        s = indptr[v] + (t - indptr[v] - 1) % deg
        u = v
        if u == start and s == slot0:
            break
    walk = np.array(walk, dtype=np.int64)
    z = pos[walk]
    area = 0.5 * np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag)
    if area < 0:
        walk = walk[::-1].copy()
    return walk


def _snap_marks(poly, pos, walk, marks):
    boundary_sites = np.unique(walk)
    idx_of = {int(s): int(np.flatnonzero(walk == s)[0]) for s in boundary_sites}
    out = []
    scale = max(poly.bounds[2] - poly.bounds[0], poly.bounds[3] - poly.bounds[1])
    for mk in marks:
        z = complex(mk)
        if poly.exterior.distance(Point(z.real, z.imag)) > 1e-9 * scale:
            raise DomainError(f"mark {z} does not lie on the domain boundary")
        d = np.abs(pos[boundary_sites] - z)
        best = boundary_sites[np.flatnonzero(d == d.min()).min()]
        out.append(idx_of[int(best)])
    out = np.array(out, dtype=np.int64)
    k = len(out)
    if k >= 3:
        rel = (out - out[0]) % len(walk)
        if np.any(np.diff(rel) < 0):  # coincident marks are tolerated
            raise DomainError("marks do not appear in counterclockwise order "
                              "on the boundary walk")
    return out


def site_density(em):
    """Sites per unit area of the lattice: faces per period over the period area."""
    area = abs((complex(em.periods[0]).conjugate() * complex(em.periods[1])).imag)
    return em.graph.nf / area


# ---------------------------------------------------------------------------
# sampling and crossings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    bits: np.ndarray
    p: float
    seed: int
    replicate: int


@dataclass(frozen=True)
class CrossingStats:
    trials: int
    successes: int

    @property
    def estimate(self):
        return self.successes / self.trials

    @property
    def se(self):
        e = self.estimate
        return math.sqrt(e * (1.0 - e) / self.trials)


def sample_configuration(dom, p, seed, replicate=0):
    """Independent site states, open with probability ``p``; deterministic in
    (seed, replicate)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    states = np.empty(dom.n_sites, dtype=np.bool_)
    u = np.empty(dom.n_sites, dtype=np.float64)
    fill_uniforms(np.uint64(seed), np.uint64(replicate), dom.codes, u)
    states[:] = u < p
    return Configuration(states, p, seed, replicate)


def _arc_pair_for_crossing(dom):
    if len(dom.marks) != 4:
        raise DomainError("crossing needs four marked boundary points")
    arcs = dom.arc_membership()
    arc_ab = np.flatnonzero(arcs[0]).astype(np.int64)
    arc_cd = np.flatnonzero(arcs[2]).astype(np.int64)
    return arc_ab, arc_cd


def crossing(dom, cfg):
    """True when an open path of sites joins boundary arc [A,B] to arc [C,D]."""
    arc_ab, arc_cd = _arc_pair_for_crossing(dom)
    return bool(_crossing_single(cfg.bits, dom.edges_u, dom.edges_v,
                                 arc_ab, arc_cd))


def crossing_between(dom, states, arc_a, arc_b):
    """Open-path test between two explicit arc site sets, for a raw state array."""
    return bool(_crossing_single(np.asarray(states, dtype=np.bool_),
                                 dom.edges_u, dom.edges_v,
                                 np.asarray(arc_a, dtype=np.int64),
                                 np.asarray(arc_b, dtype=np.int64)))


def crossing_indicators(dom, p, trials, seed, arcs=None, workers=1):
    """Per-trial crossing indicators (uint8), for couplings and exact checks."""
    if arcs is None:
        arc1, arc2 = _arc_pair_for_crossing(dom)
    else:
        arc1 = np.asarray(arcs[0], dtype=np.int64)
        arc2 = np.asarray(arcs[1], dtype=np.int64)
    chunks = chunk_ranges(trials)
    parts = map_chunks(
        lambda lo, hi: _crossing_trials(np.uint64(seed), lo, hi, dom.codes,
                                        float(p), dom.edges_u, dom.edges_v,
                                        arc1, arc2),
        chunks, workers)
    return np.concatenate(parts)


def estimate_crossing(dom, p, trials, seed, workers=1):
    """Monte Carlo estimate of the [A,B] to [C,D] open-crossing probability."""
    if trials < 1:
        raise ValueError("need at least one trial")
    ind = crossing_indicators(dom, p, trials, seed, workers=workers)
    return CrossingStats(trials, int(ind.sum()))


# ---------------------------------------------------------------------------
# separation fields
# ---------------------------------------------------------------------------

TAU = np.exp(2j * np.pi / 3)


@dataclass
class HFieldEstimate:
    """Estimates of the three separation fields, at sites or at faces.

    ``where`` is "sites" or "faces"; ``positions`` matches the chosen grid.
    Per-block counts support honest error bars for derived functionals
    (contour integrals use them).
    """
    domain: DiscreteDomain
    where: str
    positions: np.ndarray
    trials: int
    seed: int
    p: float
    counts: np.ndarray        # (3, n) event counts for A, B, C
    block_counts: np.ndarray  # (B, 3, n)
    block_sizes: np.ndarray   # (B,)

    @property
    def H_A(self):
        return self.counts[0] / self.trials

    @property
    def H_B(self):
        return self.counts[1] / self.trials

    @property
    def H_C(self):
        return self.counts[2] / self.trials

    @property
    def S(self):
        return (self.counts[0] + self.counts[1] + self.counts[2]) / self.trials

    @property
    def H(self):
        return (self.counts[0] + TAU * self.counts[1]
                + TAU ** 2 * self.counts[2]) / self.trials

    def se(self, which):
        h = self.counts[which] / self.trials
        return np.sqrt(h * (1 - h) / self.trials)

    def records(self, where_ids=None):
        """Rows (id, H_A, H_B, H_C, S, H) for a subset of sites or faces."""
        nmax = self.counts.shape[1]
        where_ids = range(nmax) if where_ids is None else where_ids
        rows = []
        for z in where_ids:
            z = int(z)
            if not 0 <= z < nmax:
                raise DomainError(f"{self.where[:-1]} {z} outside the domain")
            rows.append({self.where[:-1]: z, "H_A": self.H_A[z], "H_B": self.H_B[z],
                         "H_C": self.H_C[z], "S": self.S[z], "H": self.H[z]})
        return rows


@dataclass
class PAEstimate:
    domain: DiscreteDomain
    where: str
    edges: np.ndarray         # (k, 2) oriented site pairs or face pairs
    trials: int
    counts: np.ndarray        # (3, k) increment counts for P_A, P_B, P_C

    @property
    def P_A(self):
        return self.counts[0] / self.trials

    @property
    def P_B(self):
        return self.counts[1] / self.trials

    @property
    def P_C(self):
        return self.counts[2] / self.trials

    def se(self, which):
        q = self.counts[which] / self.trials
        return np.sqrt(q * (1 - q) / self.trials)


def _run_h_kernel(dom, trials, seed, p, q_edges, qf_pairs, workers):
    if len(dom.marks) < 3:
        raise DomainError("the separation fields need three marked boundary points")
    in_arc = dom.arc_membership()[:3]
    fc = dom.face_corners if dom.n_faces else np.zeros((0, 3), np.int64)
    q_eu = np.ascontiguousarray(q_edges[:, 0]) if len(q_edges) else np.zeros(0, np.int64)
    q_ev = np.ascontiguousarray(q_edges[:, 1]) if len(q_edges) else np.zeros(0, np.int64)
    qf_s = np.ascontiguousarray(qf_pairs[:, 0]) if len(qf_pairs) else np.zeros(0, np.int64)
    qf_t = np.ascontiguousarray(qf_pairs[:, 1]) if len(qf_pairs) else np.zeros(0, np.int64)
    chunks = chunk_ranges(trials)
    parts = map_chunks(
        lambda lo, hi: _h_chunk(np.uint64(seed), lo, hi, dom.codes, float(p),
                                dom.edges_u, dom.edges_v, in_arc, fc,
                                q_eu, q_ev, qf_s, qf_t),
        chunks, workers)
    counts = np.zeros((3, dom.n_sites), dtype=np.int64)
    fcounts = np.zeros((3, dom.n_faces), dtype=np.int64)
    inc = np.zeros((3, len(q_edges)), dtype=np.int64)
    finc = np.zeros((3, len(qf_pairs)), dtype=np.int64)
    blocks = np.zeros((len(chunks), 3, dom.n_sites), dtype=np.int32)
    fblocks = np.zeros((len(chunks), 3, dom.n_faces), dtype=np.int32)
    sizes = np.array([hi - lo for lo, hi in chunks], dtype=np.int64)
    for b, (c, fcnt, i, fi) in enumerate(parts):
        counts += c
        fcounts += fcnt
        inc += i
        finc += fi
        blocks[b] = c
        fblocks[b] = fcnt
    return counts, fcounts, inc, finc, blocks, fblocks, sizes


def estimate_H(dom, trials, seed, sites=None, p=0.5, workers=1, at="sites"):
    """Estimate the separation fields H_A, H_B, H_C (with S and H).

    H_X(z) is the probability of an open simple path between the two boundary
    arcs adjacent to corner X that separates z (together with X) from the
    opposite arc.  ``at="sites"`` evaluates at the percolation sites,
    ``at="faces"`` at the triangle faces (the primal vertices, where the
    discrete contour integrals live).
    """
    if sites is not None:
        nmax = dom.n_sites if at == "sites" else dom.n_faces
        for z in sites:
            if not 0 <= int(z) < nmax:
                raise DomainError(f"site {z} outside the domain")
    counts, fcounts, _, _, blocks, fblocks, sizes = _run_h_kernel(
        dom, trials, seed, p, np.zeros((0, 2), np.int64),
        np.zeros((0, 2), np.int64), workers)
    if at == "sites":
        return HFieldEstimate(dom, "sites", dom.pos, trials, seed, p,
                              counts, blocks, sizes)
    if at == "faces":
        return HFieldEstimate(dom, "faces", dom.face_pos, trials, seed, p,
                              fcounts, fblocks, sizes)
    raise DomainError(f"unknown field grid {at!r}")


def estimate_PA(dom, edges, trials, seed, p=0.5, workers=1, at="sites"):
    """Increment probabilities P_A, P_B, P_C along oriented edges.

    For ``at="sites"``, edges are site pairs (z, z') and P_X(e) estimates
    P[E_X(z') minus E_X(z)]; for ``at="faces"`` they are adjacent face pairs,
    which are the oriented edges of the 3-regular primal.  The color swap
    identity between P_A(e), P_B(tau.e), P_C(tau^2.e) is not assumed anywhere;
    tests measure it.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if at == "sites":
        for u, v in edges:
            if not (0 <= u < dom.n_sites and 0 <= v < dom.n_sites):
                raise DomainError("edge endpoint outside the domain")
            if v not in dom.nbrs[dom.indptr[u]:dom.indptr[u + 1]]:
                raise DomainError(f"({u}, {v}) is not an edge of the domain")
        _, _, inc, _, _, _, _ = _run_h_kernel(dom, trials, seed, p, edges,
                                              np.zeros((0, 2), np.int64), workers)
        return PAEstimate(dom, "sites", edges, trials, inc)
    if at == "faces":
        for u, v in edges:
            if not (0 <= u < dom.n_faces and 0 <= v < dom.n_faces):
                raise DomainError("face pair outside the domain")
            if v not in dom.face_nbr[u]:
                raise DomainError(f"faces ({u}, {v}) are not adjacent")
        _, _, _, finc, _, _, _ = _run_h_kernel(dom, trials, seed, p,
                                               np.zeros((0, 2), np.int64),
                                               edges, workers)
        return PAEstimate(dom, "faces", edges, trials, finc)
    raise DomainError(f"unknown edge grid {at!r}")


def rotate_edge(dom, edge, steps):
    """Rotate an oriented site edge by ``steps`` positions in its source's rotation."""
    u, v = int(edge[0]), int(edge[1])
    lo, hi = dom.indptr[u], dom.indptr[u + 1]
    ring = dom.nbrs[lo:hi]
    where = np.flatnonzero(ring == v)
    if where.size == 0:
        raise DomainError(f"({u}, {v}) is not an edge of the domain")
    return u, int(ring[(where[0] + steps) % ring.size])


def rotate_face_edge(dom, edge, steps=1):
    """The next face edge counterclockwise at the same source face (tau action).

    Face neighbors are stored in face-orbit order, which runs clockwise in the
    plane, so one counterclockwise step moves backwards through that list.
    """
    u, v = int(edge[0]), int(edge[1])
    ring = dom.face_nbr[u]
    where = np.flatnonzero(ring == v)
    if where.size == 0:
        raise DomainError(f"faces ({u}, {v}) are not adjacent")
    j = (int(where[0]) - steps) % 3
    if ring[j] < 0:
        raise DomainError("rotated face edge leaves the domain")
    return u, int(ring[j])


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContourIntegral:
    value: complex
    se: float
    edge_sum: Optional[complex] = None
    edge_sum_se: Optional[float] = None


def contour_sites(dom, curve, spacing=None, where="sites"):
    """Closed chain of sites (or faces) tracking a continuous closed curve.

    ``curve`` is a sequence of complex points (closing segment implied); the
    curve is resampled at roughly mesh spacing and each sample snaps to the
    nearest site or face center.
    """
    from scipy.spatial import cKDTree
    grid = dom.pos if where == "sites" else dom.face_pos
    curve = np.asarray([complex(z) for z in curve])
    spacing = dom.mesh if spacing is None else spacing
    pts = np.concatenate([curve, curve[:1]])
    seg = np.abs(np.diff(pts))
    arclen = np.concatenate([[0.0], np.cumsum(seg)])
    total = arclen[-1]
    k = max(8, int(np.ceil(total / spacing)))
    t = np.linspace(0.0, total, k, endpoint=False)
    xs = np.interp(t, arclen, pts.real)
    ys = np.interp(t, arclen, pts.imag)
    tree = cKDTree(np.column_stack([grid.real, grid.imag]))
    _, idx = tree.query(np.column_stack([xs, ys]))
    chain = [int(idx[0])]
    for i in idx[1:]:
        if int(i) != chain[-1]:
            chain.append(int(i))
    if len(chain) > 1 and chain[-1] == chain[0]:
        chain.pop()
    if len(chain) < 3:
        raise DomainError("contour degenerates to fewer than three points")
    return np.array(chain, dtype=np.int64)


def _riemann(field_values, pos, chain):
    z = pos[chain]
    dz = np.roll(z, -1) - z
    return np.sum(field_values[chain] * dz)


def _contour_with_blocks(hfield, chain, weights):
    """Discrete Riemann sum of a tau-weighted combination, with block errors."""
    w = np.asarray(weights).reshape(3, 1)
    pos = hfield.positions
    total = _riemann((w * hfield.counts).sum(axis=0) / hfield.trials, pos, chain)
    vals = []
    for b in range(hfield.block_counts.shape[0]):
        f = (w * hfield.block_counts[b]).sum(axis=0) / hfield.block_sizes[b]
        vals.append(_riemann(f, pos, chain))
    vals = np.array(vals)
    nb = len(vals)
    se = math.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / nb) if nb > 1 else float("inf")
    return total, se


def contour_integral_H(dom, hfield, chain, pa=None, psi_by_halfedge=None):
    """Discrete contour integral of the H field along a closed chain.

    When face-edge increment estimates ``pa`` (covering the oriented primal
    edges inside the contour) and per-primal-half-edge psi values are
    supplied, also reports the edge-sum form: the sum of psi(e) P_A(e) over
    those edges.
    """
    if len(chain) < 3:
        raise DomainError("contour must be a closed chain of at least three points")
    value, se = _contour_with_blocks(hfield, chain, [1.0, TAU, TAU ** 2])
    edge_sum = edge_sum_se = None
    if pa is not None and psi_by_halfedge is not None:
        if pa.where != "faces":
            raise DomainError("the edge-sum form needs face-edge increments")
        s = 0j
        var = 0.0
        se_arr = pa.se(0)
        for k, (u, v) in enumerate(pa.edges):
            he = _primal_halfedge_of(dom, int(u), int(v))
            w = psi_by_halfedge[he] * dom.mesh
            s += w * pa.P_A[k]
            var += abs(w) ** 2 * se_arr[k] ** 2
        edge_sum = s
        edge_sum_se = math.sqrt(var)
    return ContourIntegral(value, se, edge_sum, edge_sum_se)


def contour_integral_S(dom, hfield, chain):
    """Discrete contour integral of S = H_A + H_B + H_C along the chain."""
    value, se = _contour_with_blocks(hfield, chain, [1.0, 1.0, 1.0])
    return ContourIntegral(value, se)


def _primal_halfedge_of(dom, u, v):
    for j in range(3):
        if dom.face_nbr[u, j] == v:
            return int(dom.face_nbr_halfedge[u, j])
    raise DomainError(f"faces ({u}, {v}) are not adjacent")


def face_edges_inside(dom, chain, where="faces"):
    """Oriented face edges with both faces strictly inside the chain polygon."""
    grid = dom.face_pos if where == "faces" else dom.pos
    poly = Polygon([(z.real, z.imag) for z in grid[chain]])
    inside = shapely.contains_xy(poly, dom.face_pos.real, dom.face_pos.imag)
    if where == "faces":
        on_chain = np.zeros(dom.n_faces, dtype=bool)
        on_chain[chain] = True
        inside = inside & ~on_chain
    out = []
    for u in range(dom.n_faces):
        if not inside[u]:
            continue
        for j in range(3):
            v = int(dom.face_nbr[u, j])
            if v >= 0 and inside[v]:
                out.append((u, v))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# incipient ratios and shifted-domain couplings
# ---------------------------------------------------------------------------

def pi_ratio(tri_em, edge_pairs, radii, trials, seed, mark_angles=(90.0, 210.0, 330.0),
             p=0.5, workers=1, sides=96):
    """Ratios of edge increment probabilities across growing domains.

    Domains are regular polygons (approximating disks) of the given radii
    centered at the origin at mesh 1, with three marks at ``mark_angles`` on
    the boundary.  ``edge_pairs`` are pairs of oriented primal (face) edges
    given as ``((fid, m, n), (fid2, m2, n2))`` face-lift pairs near the
    origin; each result row reports both increment estimates and their ratio
    with a delta-method standard error, per radius, so stabilization of the
    ratio can be read off.  A vanishing denominator estimate raises an
    insufficient-trials error.
    """
    rows = {}
    for R in radii:
        ang = np.linspace(0, 2 * np.pi, sides, endpoint=False)
        poly = [R * math.cos(a) + 1j * R * math.sin(a) for a in ang]
        marks = [R * math.cos(math.radians(a)) + 1j * R * math.sin(math.radians(a))
                 for a in mark_angles]
        dom = discretize_triangulation(tri_em, poly, 1.0, marks)
        edges = []
        for (a, b) in edge_pairs:
            edges.append((dom.face_index(*a), dom.face_index(*b)))
        est = estimate_PA(dom, np.array(edges, dtype=np.int64), trials, seed, p=p,
                          workers=workers, at="faces")
        for k in range(len(edge_pairs)):
            rows[(R, k)] = (float(est.P_A[k]), float(est.se(0)[k]))
    table = []
    for k in range(len(edge_pairs) // 2):
        for R in radii:
            num, num_se = rows[(R, 2 * k)]
            den, den_se = rows[(R, 2 * k + 1)]
            if den == 0.0:
                raise RuntimeError("insufficient trials: denominator estimate is zero")
            ratio = num / den
            rse = ratio * math.sqrt((num_se / num) ** 2 + (den_se / den) ** 2) \
                if num > 0 else float("inf")
            table.append({"pair": k, "radius": R, "num": num, "den": den,
                          "ratio": ratio, "ratio_se": rse})
    return table


def shifted_PA_comparison(tri_em, polygon, delta, marks, edge_lifts, trials, seed,
                          shift=None, p=0.5, workers=1):
    """Paired increment estimates in a domain and its shifted copy.

    ``shift`` defaults to one lattice period to the left (``-delta * p1``);
    the two runs share randomness on common sites (lift-keyed counters), and
    the same physical face edge ``edge_lifts = ((f,m,n),(f2,m2,n2))`` is
    estimated in both.  With ``shift=(0, 0)`` the two estimates are
    bit-identical.
    """
    p1 = complex(tri_em.periods[0]) * delta
    p2c = complex(tri_em.periods[1]) * delta
    if shift is None:
        shift_z = -p1
    else:
        shift_z = shift[0] * p1 + shift[1] * p2c
    from shapely import affinity
    poly = _polygon(polygon)
    dom_a = discretize_triangulation(tri_em, poly, delta, marks, codes="lift")
    poly_b = affinity.translate(poly, xoff=shift_z.real, yoff=shift_z.imag)
    marks_b = [complex(m) + shift_z for m in marks]
    dom_b = discretize_triangulation(tri_em, poly_b, delta, marks_b, codes="lift")
    (a, b) = edge_lifts
    edge_a = np.array([[dom_a.face_index(*a), dom_a.face_index(*b)]], dtype=np.int64)
    edge_b = np.array([[dom_b.face_index(*a), dom_b.face_index(*b)]], dtype=np.int64)
    est_a = estimate_PA(dom_a, edge_a, trials, seed, p=p, workers=workers, at="faces")
    est_b = estimate_PA(dom_b, edge_b, trials, seed, p=p, workers=workers, at="faces")
    pa, pb = float(est_a.P_A[0]), float(est_b.P_A[0])
    rel = abs(pa - pb) / max(pa, pb) if max(pa, pb) > 0 else 0.0
    return {"P_A_domain": pa, "se_domain": float(est_a.se(0)[0]),
            "P_A_shifted": pb, "se_shifted": float(est_b.se(0)[0]),
            "relative_difference": rel}
