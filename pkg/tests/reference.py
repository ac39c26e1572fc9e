"""Slow, independent reference implementations used as oracles.

Everything here is written with plain Python sets and breadth-first search,
deliberately sharing no code with the kernels it checks.
"""

import numpy as np

TRIANGLE = (0j, 1 + 0j, 0.5 + 1j * np.sqrt(3) / 2)


def centered_symmetric_triangle(tri_embedding, delta):
    """Equilateral triangle whose discretization is exactly 3-fold symmetric.

    The centroid sits exactly on a lattice site; the triangle is grown in
    small steps until its boundary is clear of lattice rows, so the site set,
    arcs and adjacency all map onto themselves under a 120-degree rotation.
    """
    import torusperc as tp
    a, b, c = TRIANGLE
    cen = (a + b + c) / 3
    probe = tp.discretize(tri_embedding, [a, b, c], delta, [a, b, c])
    z_site = probe.pos[np.argmin(np.abs(probe.pos - cen))]
    for grow in (0.3, 0.5, 0.7, 0.9, 1.1):
        s = 1.0 + grow * delta
        verts = [z_site + s * (v - cen) for v in (a, b, c)]
        dom = tp.discretize(tri_embedding, verts, delta, verts)
        if is_three_fold_symmetric(dom, z_site):
            return dom, z_site
    raise AssertionError("no symmetric discretization found")


def is_three_fold_symmetric(dom, z_site):
    rho = np.exp(2j * np.pi / 3)
    in_arc = dom.arc_membership()[:3].astype(bool)
    pos = dom.pos
    for i in range(dom.n_sites):
        img = z_site + rho * (pos[i] - z_site)
        j = int(np.argmin(np.abs(pos - img)))
        if abs(pos[j] - img) > 1e-9:
            return False
        for a in range(3):
            if in_arc[(a + 1) % 3, j] != in_arc[a, i]:
                return False
    return True


def adjacency_lists(dom):
    return [dom.nbrs[dom.indptr[i]:dom.indptr[i + 1]].tolist()
            for i in range(dom.n_sites)]


def bfs_component(adj, blocked, start):
    if start in blocked:
        return set()
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for w in adj[x]:
            if w not in blocked and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def open_crossing(adj, states, arc1, arc2):
    """Path of open sites between two arc site sets."""
    seeds = [i for i in arc1 if states[i]]
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        x = stack.pop()
        for w in adj[x]:
            if states[w] and w not in seen:
                seen.add(w)
                stack.append(w)
    return any(i in seen for i in arc2)


def separation_events_by_paths(dom, states, allow_boundary_sites=True):
    """E_A, E_B, E_C at every site from the literal definition.

    Enumerates every simple path of open sites between the two arcs adjacent
    to a corner; a site is separated when it lies on such a path (off the
    opposite arc) or when its component after removing the path misses the
    opposite arc while touching the adjacent ones.  ``allow_boundary_sites``
    False restricts path interiors to non-boundary sites.
    """
    n = dom.n_sites
    adj = adjacency_lists(dom)
    in_arc = dom.arc_membership()[:3].astype(bool)
    is_boundary = dom.is_boundary
    out = np.zeros((3, n), dtype=bool)
    openset = set(np.flatnonzero(states).tolist())
    for X in range(3):
        a1, a2, tgt = (X + 2) % 3, X, (X + 1) % 3
        result = np.zeros(n, dtype=bool)

        def handle(path):
            pset = set(path)
            for z in path:
                if not in_arc[tgt, z]:
                    result[z] = True
            done = set()
            for z in range(n):
                if z in pset or z in done:
                    continue
                comp = bfs_component(adj, pset, z)
                done |= comp
                touches_tgt = any(in_arc[tgt, w] for w in comp)
                touches_adj = any(in_arc[a1, w] or in_arc[a2, w] for w in comp)
                if not touches_tgt and touches_adj:
                    for w in comp:
                        result[w] = True

        def dfs(path, node):
            if in_arc[a2, node]:
                handle(path)
            for w in adj[node]:
                if w in openset and w not in path:
                    if not allow_boundary_sites and is_boundary[w] \
                            and not (in_arc[a1, w] or in_arc[a2, w]):
                        continue
                    path.append(w)
                    dfs(path, w)
                    path.pop()

        for s in sorted(openset):
            if in_arc[a1, s]:
                dfs([s], s)
        out[X] = result
    return out


def bond_crossing_probability(width, height, arc1_sites, arc2_sites, pos, parity=1):
    """Exact bond-percolation crossing probability matched to the q=0 model.

    The bond lattice has vertices at the face centers of the given parity
    (including the virtual ones just outside the rectangle) and one bond per
    integer site; two integer sites are endpoints of bonds sharing a vertex
    exactly when they are corners of a common face of that parity.  Returns a
    Fraction: the number of crossing bond configurations over 2^bonds.
    """
    from fractions import Fraction
    from itertools import combinations

    n1 = (width + 1) * (height + 1)
    ints = list(range(n1))
    # L-vertices: parity-matching face centers in the extended rectangle
    lvert = {}
    for l in range(-1, height + 1):
        for k in range(-1, width + 1):
            if (k + l) % 2 == parity % 2:
                lvert[(k, l)] = []
    for i in ints:
        x, y = pos[i]
        for (k, l) in [(int(x) - 1, int(y) - 1), (int(x), int(y) - 1),
                       (int(x) - 1, int(y)), (int(x), int(y))]:
            if (k, l) in lvert:
                lvert[(k, l)].append(i)
    adj = {i: set() for i in ints}
    for members in lvert.values():
        for a, b in combinations(members, 2):
            adj[a].add(b)
            adj[b].add(a)

    count = 0
    for bits in range(1 << n1):
        states = [(bits >> i) & 1 == 1 for i in ints]
        seeds = [i for i in arc1_sites if states[i]]
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            x = stack.pop()
            for w in adj[x]:
                if states[w] and w not in seen:
                    seen.add(w)
                    stack.append(w)
        if any(i in seen for i in arc2_sites):
            count += 1
    return Fraction(count, 1 << n1)
