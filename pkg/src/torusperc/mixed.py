"""Mixed percolation on the centered square lattice.

Integer sites (type I) are open with probability 1/2; face centers split by
parity into type II (open with probability q) and type III (open with
probability 1-q).  The parameter q interpolates between critical bond
percolation on the square lattice (q = 0 or 1) and critical site percolation
on the centered square lattice (q = 1/2).

The module's centerpiece is exact: on small rectangles the crossing
probability is enumerated as a polynomial in q with rational coefficients,
and its derivative must equal the enumerated expectation of
|Piv ∩ V2| - |Piv ∩ V3| coefficient for coefficient (the generalized Russo
formula).
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .rng import stream_key, philox2x64, chunk_ranges, site_codes
from .parallel import map_chunks

_INV53 = 1.0 / 9007199254740992.0

TYPE_I, TYPE_II, TYPE_III = 0, 1, 2


class MixedError(ValueError):
    pass


@dataclass
class MixedDomain:
    width: int
    height: int
    types: np.ndarray          # per-site type constant
    pos: np.ndarray            # (n, 2) float positions
    edges_u: np.ndarray
    edges_v: np.ndarray
    indptr: np.ndarray         # CSR adjacency
    nbrs: np.ndarray
    boundary_cycle: np.ndarray  # ccw perimeter walk over integer sites
    marks: np.ndarray           # walk indices of A, B, C, D
    ring_complete: np.ndarray   # the surrounding cycle of v is fully present
    codes: np.ndarray

    @property
    def n_sites(self):
        return self.types.shape[0]

    def site_at(self, x, y):
        """Integer site id at (x, y)."""
        x, y = int(x), int(y)
        if not (0 <= x <= self.width and 0 <= y <= self.height):
            raise MixedError(f"({x}, {y}) outside the rectangle")
        return y * (self.width + 1) + x

    def center_at(self, k, l):
        """Face-center site id at (k + 1/2, l + 1/2)."""
        k, l = int(k), int(l)
        if not (0 <= k < self.width and 0 <= l < self.height):
            raise MixedError(f"center ({k}+1/2, {l}+1/2) outside the rectangle")
        return (self.width + 1) * (self.height + 1) + l * self.width + k

    def class_sites(self, t):
        return np.flatnonzero(self.types == t)

    def arc_membership(self):
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


@dataclass(frozen=True)
class MixedConfig:
    bits: np.ndarray
    q: float
    seed: int
    replicate: int
    p: float = 0.5


def build_mixed_domain(width, height, marks):
    """Centered-square rectangle with four marked boundary integer points.

    Vertices of type I at integer points, face centers typed II/III by the
    parity of k+l; centers adjacent to their four corners and to nothing else;
    arcs run along the perimeter through integer sites only, marks belonging
    to both incident arcs.
    """
    w, h = int(width), int(height)
    if w < 1 or h < 0:
        raise MixedError("rectangle width must be at least 1 and height nonnegative")
    n1 = (w + 1) * (h + 1)
    n = n1 + w * h
    types = np.empty(n, dtype=np.int64)
    posx = np.empty(n)
    posy = np.empty(n)
    for y in range(h + 1):
        for x in range(w + 1):
            i = y * (w + 1) + x
            types[i] = TYPE_I
            posx[i], posy[i] = x, y
    for l in range(h):
        for k in range(w):
            i = n1 + l * w + k
            types[i] = TYPE_II if (k + l) % 2 == 0 else TYPE_III
            posx[i], posy[i] = k + 0.5, l + 0.5

    edges = []
    for y in range(h + 1):
        for x in range(w + 1):
            i = y * (w + 1) + x
            if x < w:
                edges.append((i, i + 1))
            if y < h:
                edges.append((i, i + w + 1))
    for l in range(h):
        for k in range(w):
            c = n1 + l * w + k
            for dx in (0, 1):
                for dy in (0, 1):
                    edges.append((c, (l + dy) * (w + 1) + (k + dx)))
    eu = np.array([e[0] for e in edges], dtype=np.int64)
    ev = np.array([e[1] for e in edges], dtype=np.int64)

    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    indptr = np.zeros(n + 1, dtype=np.int64)
    nbrs = []
    for i in range(n):
        nbrs.extend(sorted(adj[i]))
        indptr[i + 1] = len(nbrs)
    nbrs = np.array(nbrs, dtype=np.int64)

    walk = []
    for x in range(w):
        walk.append((x, 0))
    for y in range(h):
        walk.append((w, y))
    for x in range(w, 0, -1):
        walk.append((x, h))
    for y in range(h, 0, -1):
        walk.append((0, y))
    cyc = np.array([y * (w + 1) + x for x, y in walk], dtype=np.int64)

    mark_idx = []
    for mk in marks:
        x, y = float(mk[0]), float(mk[1])
        if not (0 <= x <= w and 0 <= y <= h):
            raise MixedError(f"mark {mk} outside the rectangle")
        on_edge = min(x, w - x) < 1e-9 or min(y, h - y) < 1e-9
        if not on_edge:
            raise MixedError(f"mark {mk} does not lie on the boundary")
        d = (posx[cyc] - x) ** 2 + (posy[cyc] - y) ** 2
        best = int(np.flatnonzero(d == d.min()).min())
        mark_idx.append(best)
    mark_idx = np.array(mark_idx, dtype=np.int64)
    if len(mark_idx) != 4:
        raise MixedError("mixed domains need four marks")
    rel = (mark_idx - mark_idx[0]) % len(cyc)
    if h > 0 and np.any(np.diff(rel) < 0):
        # coincident marks are tolerated; the h = 0 strip walks its one row
        # out and back, where cyclic order is meaningless
        raise MixedError("marks must sit counterclockwise on the perimeter")

    ring_complete = np.zeros(n, dtype=np.bool_)
    for y in range(h + 1):
        for x in range(w + 1):
            ring_complete[y * (w + 1) + x] = (0 < x < w and 0 < y < h)
    for i in range(n1, n):
        ring_complete[i] = True  # the four corners form a cycle via lattice edges

    return MixedDomain(w, h, types, np.column_stack([posx, posy]), eu, ev,
                       indptr, nbrs, cyc, mark_idx, ring_complete,
                       site_codes(n))


@numba.njit(cache=True, inline="always")
def _mx_find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True, nogil=True)
def _mx_fill(key, codes, types, p, q, states):
    for i in range(codes.shape[0]):
        x0, _ = philox2x64(codes[i], np.uint64(0), key)
        u = np.float64(x0 >> np.uint64(11)) * _INV53
        if types[i] == 0:
            states[i] = u < p
        elif types[i] == 1:
            states[i] = u < q
        else:
            states[i] = u < 1.0 - q


@numba.njit(cache=True, nogil=True)
def _mx_cross(states, eu, ev, arc1, arc2, skip, force, n):
    # crossing with site `skip` forced closed, or `force` forced open (-1: none)
    parent = np.empty(n + 2, dtype=np.int64)
    for i in range(n + 2):
        parent[i] = i
    va, vb = n, n + 1
    for k in arc1:
        if (states[k] or k == force) and k != skip:
            pa, pb = _mx_find(parent, va), _mx_find(parent, k)
            if pa != pb:
                parent[pb] = pa
    for k in arc2:
        if (states[k] or k == force) and k != skip:
            pa, pb = _mx_find(parent, vb), _mx_find(parent, k)
            if pa != pb:
                parent[pb] = pa
    for j in range(eu.shape[0]):
        a, b = eu[j], ev[j]
        if a == skip or b == skip:
            continue
        if (states[a] or a == force) and (states[b] or b == force):
            pa, pb = _mx_find(parent, a), _mx_find(parent, b)
            if pa != pb:
                parent[pb] = pa
    return _mx_find(parent, va) == _mx_find(parent, vb)


@numba.njit(cache=True, nogil=True)
def _mx_pivotal(states, eu, ev, arc1, arc2, indptr, nbrs, ring_complete, in_arc, n):
    """Exact pivotal mask by the two-point evaluation, with the safe skip:
    a site with a complete all-open surrounding ring off the arcs is never
    pivotal."""
    out = np.zeros(n, dtype=np.uint8)
    base = _mx_cross(states, eu, ev, arc1, arc2, -1, -1, n)
    for v in range(n):
        cand = not ring_complete[v] or in_arc[v]
        if not cand:
            allopen = True
            for s in range(indptr[v], indptr[v + 1]):
                if not states[nbrs[s]]:
                    allopen = False
                    break
            cand = not allopen
        if not cand:
            continue
        if base:
            if not states[v]:
                continue  # U holds with v closed already: not pivotal
            if not _mx_cross(states, eu, ev, arc1, arc2, v, -1, n):
                out[v] = 1
        else:
            if states[v]:
                continue  # U fails with v open already: not pivotal
            if _mx_cross(states, eu, ev, arc1, arc2, -1, v, n):
                out[v] = 1
    return out


@numba.njit(cache=True, nogil=True)
def _mx_trials(seed, lo, hi, codes, types, p, q, eu, ev, arc1, arc2,
               indptr, nbrs, ring_complete, in_arc, want_pivotal, probe_a, probe_b):
    n = codes.shape[0]
    cross_count = 0
    russo_sum = 0.0
    russo_sq = 0.0
    probe_count = np.zeros(3, dtype=np.int64)  # piv[a], piv[b], paired diff sum
    diff_sum = 0
    diff_sq = 0
    states = np.empty(n, dtype=np.bool_)
    for rep in range(lo, hi):
        key = stream_key(np.uint64(seed), np.uint64(rep))
        _mx_fill(key, codes, types, p, q, states)
        if _mx_cross(states, eu, ev, arc1, arc2, -1, -1, n):
            cross_count += 1
        if want_pivotal:
            piv = _mx_pivotal(states, eu, ev, arc1, arc2, indptr, nbrs,
                              ring_complete, in_arc, n)
            d = 0
            for i in range(n):
                if piv[i] == 1:
                    if types[i] == 1:
                        d += 1
                    elif types[i] == 2:
                        d -= 1
            russo_sum += d
            russo_sq += d * d
            if probe_a >= 0:
                pa = piv[probe_a] == 1
                pb = piv[probe_b] == 1 if probe_b >= 0 else False
                if pa:
                    probe_count[0] += 1
                if pb:
                    probe_count[1] += 1
                dd = (1 if pa else 0) - (1 if pb else 0)
                diff_sum += dd
                diff_sq += dd * dd
    return cross_count, russo_sum, russo_sq, probe_count, diff_sum, diff_sq


def sample_mixed(dom, q, seed, replicate=0, p=0.5):
    """Type I open with probability ``p`` (1/2 at criticality), II with ``q``,
    III with ``1-q``, independently; deterministic in (seed, replicate)."""
    if not 0.0 <= q <= 1.0:
        raise MixedError("q must lie in [0, 1]")
    states = np.empty(dom.n_sites, dtype=np.bool_)
    key = np.uint64(stream_key(np.uint64(seed), np.uint64(replicate)))
    _mx_fill(key, dom.codes, dom.types, float(p), float(q), states)
    return MixedConfig(states, q, seed, replicate, p)


def _arc_pair(dom):
    arcs = dom.arc_membership()
    return (np.flatnonzero(arcs[0]).astype(np.int64),
            np.flatnonzero(arcs[2]).astype(np.int64))


def crossing_mixed(dom, cfg):
    """Open chain between the boundary arcs (AB) and (CD)."""
    a1, a2 = _arc_pair(dom)
    return bool(_mx_cross(cfg.bits, dom.edges_u, dom.edges_v, a1, a2, -1, -1,
                          dom.n_sites))


def pivotal_sites(dom, cfg):
    """The sets of pivotal sites for the crossing, split by vertex class.

    A site is pivotal when the crossing holds with it open and fails with it
    closed, regardless of its sampled state.
    """
    a1, a2 = _arc_pair(dom)
    in_arc = np.zeros(dom.n_sites, dtype=np.bool_)
    in_arc[a1] = True
    in_arc[a2] = True
    mask = _mx_pivotal(cfg.bits, dom.edges_u, dom.edges_v, a1, a2,
                       dom.indptr, dom.nbrs, dom.ring_complete, in_arc,
                       dom.n_sites).astype(bool)
    return (set(np.flatnonzero(mask & (dom.types == TYPE_I)).tolist()),
            set(np.flatnonzero(mask & (dom.types == TYPE_II)).tolist()),
            set(np.flatnonzero(mask & (dom.types == TYPE_III)).tolist()))


def pivotal_naive(dom, cfg):
    """Definition-level pivotality: recompute the crossing twice per site."""
    a1, a2 = _arc_pair(dom)
    out = np.zeros(dom.n_sites, dtype=bool)
    for v in range(dom.n_sites):
        with_open = _mx_cross(cfg.bits, dom.edges_u, dom.edges_v, a1, a2,
                              -1, v, dom.n_sites)
        with_closed = _mx_cross(cfg.bits, dom.edges_u, dom.edges_v, a1, a2,
                                v, -1, dom.n_sites)
        out[v] = with_open and not with_closed
    return out


def _run_mixed(dom, q, trials, seed, p, workers, want_pivotal,
               probe_a=-1, probe_b=-1):
    a1, a2 = _arc_pair(dom)
    in_arc = np.zeros(dom.n_sites, dtype=np.bool_)
    in_arc[a1] = True
    in_arc[a2] = True
    chunks = chunk_ranges(trials)
    parts = map_chunks(
        lambda lo, hi: _mx_trials(np.uint64(seed), lo, hi, dom.codes, dom.types,
                                  float(p), float(q), dom.edges_u, dom.edges_v,
                                  a1, a2, dom.indptr, dom.nbrs,
                                  dom.ring_complete, in_arc, want_pivotal,
                                  probe_a, probe_b),
        chunks, workers)
    cross = sum(p_[0] for p_ in parts)
    rsum = sum(p_[1] for p_ in parts)
    rsq = sum(p_[2] for p_ in parts)
    probe = sum(p_[3] for p_ in parts)
    dsum = sum(p_[4] for p_ in parts)
    dsq = sum(p_[5] for p_ in parts)
    return cross, rsum, rsq, probe, dsum, dsq


def estimate_crossing_mixed(dom, q, trials, seed, p=0.5, workers=1):
    """Monte Carlo crossing probability with standard error."""
    cross, *_ = _run_mixed(dom, q, trials, seed, p, workers, False)
    est = cross / trials
    return {"q": q, "trials": trials, "estimate": est,
            "se": math.sqrt(est * (1 - est) / trials)}


def russo_derivative(dom, q, trials, seed, p=0.5, workers=1):
    """Monte Carlo estimate of d/dq of the crossing probability.

    By the generalized Russo formula this is the expectation of
    |Piv ∩ V2| - |Piv ∩ V3|.
    """
    _, rsum, rsq, *_ = _run_mixed(dom, q, trials, seed, p, workers, True)
    mean = rsum / trials
    var = max(rsq / trials - mean ** 2, 0.0)
    return {"q": q, "trials": trials, "estimate": mean,
            "se": math.sqrt(var / trials)}


def delta_v(dom, v, q, trials, seed, p=0.5, workers=1):
    """Coupled estimate of P[v pivotal] - P[v' pivotal], v' one step right.

    ``v`` must be a type II site and ``v'`` the type III site at v + (1, 0);
    both indicators are evaluated on the same configurations.
    """
    v = int(v)
    if dom.types[v] != TYPE_II:
        raise MixedError("delta_v expects a type II site")
    x, y = dom.pos[v]
    k, l = int(x - 0.5), int(y - 0.5)
    if k + 1 >= dom.width:
        raise MixedError("the shifted site v + (1, 0) leaves the domain")
    v2 = dom.center_at(k + 1, l)
    _, _, _, probe, dsum, dsq = _run_mixed(dom, q, trials, seed, p, workers,
                                           True, probe_a=v, probe_b=v2)
    mean = dsum / trials
    var = max(dsq / trials - mean ** 2, 0.0)
    return {"v": v, "v_shift": v2, "q": q, "trials": trials,
            "p_piv_v": probe[0] / trials, "p_piv_v_shift": probe[1] / trials,
            "estimate": mean, "se": math.sqrt(var / trials)}


def interpolate(dom, q_grid, trials, seed, p=0.5, workers=1):
    """Crossing-probability curve over a q grid with the quadrature check.

    Reports the estimated curve, the endpoint difference P(q_max) - P(q_min),
    and the trapezoidal integral of the Russo-derivative estimates over the
    grid; the two must agree within combined Monte Carlo error.
    """
    q_grid = sorted(float(q) for q in q_grid)
    if not q_grid:
        raise MixedError("empty q grid")
    curve = []
    deriv = []
    # common random numbers across the grid: the same replicate uses the same
    # uniforms at every q, so constant-in-q observables come out exactly flat
    for q in q_grid:
        cross, rsum, rsq, *_ = _run_mixed(dom, q, trials, seed, p,
                                          workers, True)
        est = cross / trials
        dmean = rsum / trials
        dvar = max(rsq / trials - dmean ** 2, 0.0)
        curve.append({"q": q, "estimate": est,
                      "se": math.sqrt(est * (1 - est) / trials)})
        deriv.append({"q": q, "estimate": dmean, "se": math.sqrt(dvar / trials)})
    quad = 0.0
    quad_var = 0.0
    for i in range(len(q_grid) - 1):
        hq = q_grid[i + 1] - q_grid[i]
        quad += 0.5 * hq * (deriv[i]["estimate"] + deriv[i + 1]["estimate"])
        quad_var += (0.5 * hq) ** 2 * (deriv[i]["se"] ** 2 + deriv[i + 1]["se"] ** 2)
    diff = curve[-1]["estimate"] - curve[0]["estimate"]
    diff_se = math.sqrt(curve[-1]["se"] ** 2 + curve[0]["se"] ** 2)
    return {"curve": curve, "derivative": deriv, "quadrature": quad,
            "quadrature_se": math.sqrt(quad_var), "endpoint_difference": diff,
            "endpoint_difference_se": diff_se}


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _enum_kernel(types, eu, ev, arc1, arc2, indptr, nbrs, ring_complete, in_arc,
                 want_russo):
    """Tally exact configuration counts by (q-exponent, (1-q)-exponent).

    Returns integer matrices N (crossing) and M (signed pivotal counts); entry
    [a, b] collects configurations with q^a (1-q)^b center weights.
    """
    n = types.shape[0]
    n2 = 0
    for i in range(n):
        if types[i] != 0:
            n2 += 1
    size = n2 + 1
    ncross = np.zeros((size, size), dtype=np.int64)
    mrusso = np.zeros((size, size), dtype=np.int64)
    states = np.empty(n, dtype=np.bool_)
    total = 1 << n
    for bits in range(total):
        for i in range(n):
            states[i] = (bits >> i) & 1 == 1
        a = 0
        b = 0
        for i in range(n):
            if types[i] == 1:
                if states[i]:
                    a += 1
                else:
                    b += 1
            elif types[i] == 2:
                if states[i]:
                    b += 1
                else:
                    a += 1
        crossed = _mx_cross(states, eu, ev, arc1, arc2, -1, -1, n)
        if crossed:
            ncross[a, b] += 1
        if want_russo:
            piv = _mx_pivotal(states, eu, ev, arc1, arc2, indptr, nbrs,
                              ring_complete, in_arc, n)
            d = 0
            for i in range(n):
                if piv[i] == 1:
                    if types[i] == 1:
                        d += 1
                    elif types[i] == 2:
                        d -= 1
            mrusso[a, b] += d
    return ncross, mrusso


def _counts_to_poly(counts, n1):
    """Exact polynomial (1/2)^n1 sum counts[a,b] q^a (1-q)^b as Fraction coeffs."""
    size = counts.shape[0]
    coeffs = [Fraction(0)] * size
    half = Fraction(1, 2) ** n1
    for a in range(size):
        for b in range(size - a):
            c = int(counts[a, b])
            if c == 0:
                continue
            for j in range(b + 1):
                coeffs[a + j] += half * c * math.comb(b, j) * (-1) ** j
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def poly_eval(coeffs, q):
    q = Fraction(q) if not isinstance(q, float) else q
    out = 0 if not isinstance(q, float) else 0.0
    for c in reversed(coeffs):
        out = out * q + (c if isinstance(q, Fraction) else float(c))
    return out


def poly_derivative(coeffs):
    return [k * c for k, c in enumerate(coeffs)][1:] or [Fraction(0)]


def exact_polynomial(dom, observable="crossing", swap_classes=False):
    """Exact value of the observable as a polynomial in q (Fraction coefficients).

    ``observable`` is "crossing" (P[U]) or "russo" (E[|Piv n V2| - |Piv n V3|]).
    ``swap_classes`` exchanges the roles of the type II and III sites, which
    must equal the substitution q -> 1-q.  Only domains with at most 22 sites
    are enumerable.
    """
    n = dom.n_sites
    if n > 22:
        raise MixedError(f"{n} sites exceed the exact-enumeration budget (22)")
    types = dom.types.copy()
    if swap_classes:
        types = np.where(types == TYPE_II, 99, types)
        types = np.where(types == TYPE_III, TYPE_II, types)
        types = np.where(types == 99, TYPE_III, types)
    a1, a2 = _arc_pair(dom)
    in_arc = np.zeros(n, dtype=np.bool_)
    in_arc[a1] = True
    in_arc[a2] = True
    ncross, mrusso = _enum_kernel(types, dom.edges_u, dom.edges_v, a1, a2,
                                  dom.indptr, dom.nbrs, dom.ring_complete,
                                  in_arc, observable == "russo")
    n1 = int(np.sum(types == TYPE_I))
    if observable == "crossing":
        return _counts_to_poly(ncross, n1)
    if observable == "russo":
        return _counts_to_poly(mrusso, n1)
    raise MixedError(f"unknown observable {observable!r}")