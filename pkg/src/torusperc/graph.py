"""Finite graphs embedded in the torus, as rotation systems with displacements.

A :class:`TorusGraph` stores directed half-edges: ``twin`` pairs them into
undirected edges, ``nxt`` is the counterclockwise order of half-edges around
their common source vertex, and ``disp`` records which copy of the fundamental
domain the half-edge lands in (a pair of integers).  Faces are the orbits of
``nxt[twin[h]]``; with counterclockwise rotations this orbit walks the face
lying to the *right* of each of its half-edges.

Conventions fixed here and relied on elsewhere:

* the dual half-edge of ``h`` points from the face right of ``h`` to the face
  left of ``h`` (a quarter-turn counterclockwise from ``h``);
* face lift offsets start at (0, 0) on the face's lowest-numbered half-edge;
* faces, vertices and half-edges are numbered deterministically from the
  construction order, so every derived object is reproducible.
"""

from fractions import Fraction

import numpy as np

ROLE_PRIMAL = "primal-3-regular"
ROLE_TRIANGULATION = "dual-triangulation"
ROLE_GENERAL = "general"
_ROLES = (ROLE_PRIMAL, ROLE_TRIANGULATION, ROLE_GENERAL)

_GRAPH_FILE_FIELDS = {"vertices", "edges", "positions", "rotations", "role"}


class GraphError(ValueError):
    """A graph description violates a structural invariant."""


class TorusGraph:
    """Immutable rotation system on the torus.

    Parameters
    ----------
    nv : number of vertices
    src, twin, nxt : int arrays over half-edges
    disp : (2E, 2) int array of fundamental-domain displacements
    role : one of the role constants above
    positions : optional (nv, 2) float array, a-priori torus coordinates
    strict : if True enforce the full genus-1 invariants (Euler formula,
        zero displacement sum around faces, displacement lattice = Z^2);
        covering graphs and other derived site lattices need not embed in
        the torus and are built with ``strict=False``.
    """

    def __init__(self, nv, src, twin, nxt, disp, role=ROLE_GENERAL,
                 positions=None, strict=True):
        self.nv = int(nv)
        self.src = np.asarray(src, dtype=np.int64)
        self.twin = np.asarray(twin, dtype=np.int64)
        self.nxt = np.asarray(nxt, dtype=np.int64)
        self.disp = np.asarray(disp, dtype=np.int64).reshape(-1, 2)
        self.role = role
        self.positions = None if positions is None else np.asarray(positions, dtype=np.float64)
        self.strict = bool(strict)
        self._validate()
        self.prev = np.empty_like(self.nxt)
        self.prev[self.nxt] = np.arange(self.nh)
        self.faces = self._face_cycles()
        self.face_of = np.empty(self.nh, dtype=np.int64)
        for fid, cyc in enumerate(self.faces):
            self.face_of[cyc] = fid
        self.face_offset = self._face_offsets()
        self._check_faces()

    # -- basic views ---------------------------------------------------

    @property
    def nh(self):
        """Number of half-edges (twice the edge count)."""
        return self.src.shape[0]

    @property
    def ne(self):
        return self.nh // 2

    @property
    def nf(self):
        return len(self.faces)

    def dst(self, h):
        return self.src[self.twin[h]]

    @property
    def degrees(self):
        return np.bincount(self.src, minlength=self.nv)

    def vertex_halfedges(self, v):
        """Half-edges out of ``v`` in rotation (counterclockwise) order."""
        h0 = int(np.flatnonzero(self.src == v)[0])
        cyc = [h0]
        h = int(self.nxt[h0])
        while h != h0:
            cyc.append(h)
            h = int(self.nxt[h])
        return cyc

    def tau(self, h):
        """Next edge counterclockwise at the source of ``h``."""
        return int(self.nxt[h])

    def canonical_edges(self):
        """One half-edge per undirected edge (the lower id of each pair)."""
        return np.flatnonzero(np.arange(self.nh) < self.twin)

    # -- validation ----------------------------------------------------

    def _validate(self):
        nh = self.nh
        if nh % 2:
            raise GraphError("odd number of half-edges")
        if self.role not in _ROLES:
            raise GraphError(f"unknown role {self.role!r}")
        if nh == 0 or self.nv == 0:
            raise GraphError("empty graph")
        if self.src.min() < 0 or self.src.max() >= self.nv:
            raise GraphError("half-edge source out of range")
        t = self.twin
        if np.any(t[t] != np.arange(nh)) or np.any(t == np.arange(nh)):
            raise GraphError("twin is not a fixed-point-free involution")
        if np.any(self.disp[t] != -self.disp):
            raise GraphError("twin displacement is not the negated displacement")
        if sorted(self.nxt.tolist()) != list(range(nh)):
            raise GraphError("next-around-source is not a permutation")
        if np.any(self.src[self.nxt] != self.src):
            raise GraphError("next-around-source leaves its source vertex")
        # every half-edge at a vertex must be in one rotation cycle
        seen = np.zeros(nh, dtype=bool)
        for v in range(self.nv):
            at_v = np.flatnonzero(self.src == v)
            if at_v.size == 0:
                raise GraphError(f"vertex {v} is isolated")
            h0 = int(at_v[0])
            h, count = h0, 0
            while True:
                seen[h] = True
                count += 1
                h = int(self.nxt[h])
                if h == h0:
                    break
            if count != at_v.size:
                raise GraphError(f"rotation at vertex {v} splits into several cycles")
        if not seen.all():
            raise GraphError("rotation cycles do not cover all half-edges")
        if self.role == ROLE_PRIMAL and np.any(self.degrees != 3):
            raise GraphError("primal-3-regular graph has a vertex of degree != 3")
        self._check_connected()
        if self.strict:
            self._check_lattice_full()
        if self.positions is not None and self.positions.shape != (self.nv, 2):
            raise GraphError("positions array has the wrong shape")

    def _check_connected(self):
        seen = np.zeros(self.nv, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for h in np.flatnonzero(self.src == v):
                w = int(self.src[self.twin[h]])
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        if not seen.all():
            raise GraphError("graph is not connected")

    def spanning_offsets(self):
        """Integer lift offset per vertex from a BFS tree rooted at vertex 0."""
        off = np.zeros((self.nv, 2), dtype=np.int64)
        seen = np.zeros(self.nv, dtype=bool)
        seen[0] = True
        queue = [0]
        order = np.argsort(self.src, kind="stable")
        starts = np.searchsorted(self.src[order], np.arange(self.nv))
        ends = np.searchsorted(self.src[order], np.arange(self.nv) + 1)
        while queue:
            v = queue.pop(0)
            for h in order[starts[v]:ends[v]]:
                w = int(self.src[self.twin[h]])
                if not seen[w]:
                    seen[w] = True
                    off[w] = off[v] + self.disp[h]
                    queue.append(w)
        return off

    def _check_lattice_full(self):
        off = self.spanning_offsets()
        cyc = off[self.src] + self.disp - off[self.src[self.twin]]
        vecs = [v for v in cyc.tolist() if v != [0, 0]]
        g = 0
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                g = int(np.gcd(g, vecs[i][0] * vecs[j][1] - vecs[i][1] * vecs[j][0]))
                if g == 1:
                    return
        raise GraphError("cycle displacements do not generate Z^2 (genus != 1)")

    def _face_cycles(self):
        seen = np.zeros(self.nh, dtype=bool)
        cycles = []
        for h0 in range(self.nh):
            if seen[h0]:
                continue
            cyc = []
            h = h0
            while not seen[h]:
                seen[h] = True
                cyc.append(h)
                h = int(self.nxt[self.twin[h]])
            cycles.append(np.array(cyc, dtype=np.int64))
        return cycles

    def _face_offsets(self):
        off = np.zeros((self.nh, 2), dtype=np.int64)
        for cyc in self.faces:
            acc = np.zeros(2, dtype=np.int64)
            for h in cyc:
                off[h] = acc
                acc = acc + self.disp[h]
        return off

    def _check_faces(self):
        if self.strict:
            if self.nv - self.ne + self.nf != 0:
                raise GraphError(
                    f"Euler characteristic V-E+F = {self.nv - self.ne + self.nf}, expected 0")
            for cyc in self.faces:
                if np.any(self.disp[cyc].sum(axis=0) != 0):
                    raise GraphError("displacements around a face do not sum to zero")
        if self.role == ROLE_TRIANGULATION:
            if any(len(c) != 3 for c in self.faces):
                raise GraphError("dual-triangulation graph has a non-triangular face")

    # -- derived graphs -------------------------------------------------

    def face_vertex(self, face_id):
        """For a dual graph: the primal vertex its ``face_id``-th face surrounds.

        Every half-edge of a dual face crosses an edge into the same primal
        vertex; that vertex is ``src[twin[h]]`` of any member ``h``.
        """
        return int(self.src[self.twin[self.faces[face_id][0]]])


def build_torus_graph(spec, strict=True):
    """Build a validated TorusGraph from a structured description.

    ``spec`` is a dict with fields ``vertices`` (count), ``edges`` (list of
    ``[u, v, dx, dy]``), optional ``positions`` (per-vertex ``[x, y]`` with
    rational strings like ``"1/3"`` allowed), optional ``rotations``
    (per-vertex counterclockwise list of ``[edge_index, end]``, ``end`` 0 for
    the u-side half-edge and 1 for the v-side) and optional ``role``.

    Rotations are taken from the explicit field when present, else from
    position angles, else from edge input order.  Unknown fields are rejected.
    """
    unknown = set(spec) - _GRAPH_FILE_FIELDS
    if unknown:
        raise GraphError(f"unknown graph fields: {sorted(unknown)}")
    if "vertices" not in spec or "edges" not in spec:
        raise GraphError("graph spec needs 'vertices' and 'edges'")
    nv = int(spec["vertices"])
    edges = spec["edges"]
    role = spec.get("role", ROLE_GENERAL)
    positions = None
    if spec.get("positions") is not None:
        if len(spec["positions"]) != nv:
            raise GraphError("positions length does not match vertex count")
        positions = np.array(
            [[float(Fraction(str(c))) for c in p] for p in spec["positions"]])

    ne = len(edges)
    src = np.empty(2 * ne, dtype=np.int64)
    twin = np.empty(2 * ne, dtype=np.int64)
    disp = np.empty((2 * ne, 2), dtype=np.int64)
    for i, (u, v, dx, dy) in enumerate(edges):
        if not (0 <= u < nv and 0 <= v < nv):
            raise GraphError(f"edge {i} endpoint out of range")
        src[2 * i], src[2 * i + 1] = u, v
        twin[2 * i], twin[2 * i + 1] = 2 * i + 1, 2 * i
        disp[2 * i] = (dx, dy)
        disp[2 * i + 1] = (-dx, -dy)

    if spec.get("rotations") is not None:
        rots = []
        for v, order in enumerate(spec["rotations"]):
            rots.append([2 * e + end for e, end in order])
        nxt = _nxt_from_rotations(nv, src, rots)
    elif positions is not None:
        nxt = _nxt_from_angles(nv, src, twin, disp, positions)
    else:
        order = [[] for _ in range(nv)]
        for h in range(2 * ne):
            order[src[h]].append(h)
        nxt = _nxt_from_rotations(nv, src, order)

    return TorusGraph(nv, src, twin, nxt, disp, role=role,
                      positions=positions, strict=strict)


def _nxt_from_rotations(nv, src, rotations):
    nh = src.shape[0]
    nxt = np.full(nh, -1, dtype=np.int64)
    for v, cyc in enumerate(rotations):
        if sorted(cyc) != sorted(np.flatnonzero(src == v).tolist()):
            raise GraphError(f"rotation list at vertex {v} does not match its half-edges")
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            nxt[a] = b
    return nxt


def _nxt_from_angles(nv, src, twin, disp, positions):
    vec = positions[src[twin]] + disp - positions[src]
    ang = np.arctan2(vec[:, 1], vec[:, 0])
    rotations = []
    for v in range(nv):
        at_v = np.flatnonzero(src == v)
        a = ang[at_v]
        if np.unique(np.round(a, 12)).size != a.size:
            raise GraphError(
                f"parallel half-edges at vertex {v}: supply an explicit rotation")
        rotations.append(at_v[np.argsort(a)].tolist())
    return _nxt_from_rotations(nv, src, rotations)


def read_graph_file(path, strict=True):
    """Load a graph from the JSON file format documented in the README."""
    import json
    with open(path) as fh:
        spec = json.load(fh)
    return build_torus_graph(spec, strict=strict)


# -- built-in graphs ----------------------------------------------------

def builtin(name):
    """The named built-in torus graph.

    ``T_h``: one period of the honeycomb lattice (4 vertices).
    ``T_s``: the 3-regular graph whose dual is the centered square lattice.
    ``T_s_refined``: ``T_s`` with one vertex replaced by a triangle, i.e. the
    primal of the centered-square triangulation with one vertical face split.
    ``Z2_bond``: one period of the square lattice (1 vertex, 2 loops).
    """
    if name == "T_h":
        return build_torus_graph({
            "vertices": 4,
            "edges": [[0, 1, 0, 0], [1, 2, 0, -1], [1, 2, 0, 0],
                      [2, 3, 0, 0], [3, 0, 1, 0], [3, 0, 1, 1]],
            "positions": [["0", "0"], ["1/3", "0"], ["1/2", "1/2"], ["5/6", "1/2"]],
            "role": ROLE_PRIMAL,
        })
    if name == "T_s":
        return build_torus_graph({
            "vertices": 4,
            "edges": [[0, 2, 0, 0], [0, 3, 0, -1], [0, 1, -1, 0],
                      [1, 2, 0, 0], [1, 3, 0, -1], [2, 3, 0, 0]],
            "positions": [["0", "0"], ["1/2", "0"], ["1/4", "1/4"], ["1/4", "3/4"]],
            "role": ROLE_PRIMAL,
        })
    if name == "T_s_refined":
        ts = builtin("T_s")
        tri = dual(ts)
        # splitting the face dual to vertex 0 of T_s replaces that vertex by a
        # triangle; vertex 0 sits on a vertical face of the centered square
        # lattice, which is the choice with alpha_rw = i*sqrt(6/7)
        face = next(f for f in range(tri.nf) if tri.face_vertex(f) == 0)
        return dual(refine_face(tri, face))
    if name == "Z2_bond":
        return build_torus_graph({
            "vertices": 1,
            "edges": [[0, 0, 1, 0], [0, 0, 0, 1]],
            "positions": [["0", "0"]],
            "role": ROLE_GENERAL,
        })
    raise GraphError(f"unknown builtin {name!r}")


BUILTIN_NAMES = ("T_h", "T_s", "T_s_refined", "Z2_bond")


# -- duality -------------------------------------------------------------

def dual(g):
    """The dual rotation system, with displacements transported consistently.

    Dual half-edge ``i`` crosses primal half-edge ``i`` from its right face to
    its left face.  Applying ``dual`` twice gives the original graph with all
    half-edges reversed (checked by ``double_dual_is_reversed``).
    """
    nf = g.nf
    src = g.face_of.copy()
    nxt = g.twin[g.prev]
    disp = g.face_offset + g.disp - g.face_offset[g.twin]
    if g.role == ROLE_PRIMAL:
        role = ROLE_TRIANGULATION
    elif g.role == ROLE_TRIANGULATION:
        role = ROLE_PRIMAL
    else:
        role = ROLE_GENERAL
    positions = None
    if g.positions is not None:
        positions = np.zeros((nf, 2))
        for fid, cyc in enumerate(g.faces):
            corners = g.positions[g.src[cyc]] + g.face_offset[cyc]
            positions[fid] = corners.mean(axis=0)
    return TorusGraph(nf, src, g.twin.copy(), nxt, disp, role=role,
                      positions=positions, strict=g.strict)


def double_dual_is_reversed(g):
    """Check dual(dual(g)) == g with every half-edge reversed.

    The half-edge correspondence is ``i -> twin[i]``; vertices map through it
    and displacements must agree up to a re-lift of each vertex.
    """
    dd = dual(dual(g))
    vmap = np.full(dd.nv, -1, dtype=np.int64)
    for i in range(g.nh):
        tgt = g.src[g.twin[i]]
        if vmap[dd.src[i]] == -1:
            vmap[dd.src[i]] = tgt
        elif vmap[dd.src[i]] != tgt:
            return False
    if sorted(vmap.tolist()) != list(range(g.nv)):
        return False
    if np.any(g.twin[dd.nxt] != g.nxt[g.twin]):
        return False
    # displacement difference must be a coboundary: delta = rho[dst] - rho[src]
    delta = g.disp[g.twin] - dd.disp
    rho = {0: np.zeros(2, dtype=np.int64)}
    stack = [0]
    while stack:
        v = stack.pop()
        for i in np.flatnonzero(dd.src == v):
            w = int(dd.src[dd.twin[i]])
            want = rho[v] + delta[i]
            if w in rho:
                if np.any(rho[w] != want):
                    return False
            else:
                rho[w] = want
                stack.append(w)
    return len(rho) == dd.nv


# -- refinement ----------------------------------------------------------

def refine_face(g, face_id):
    """Split triangular face ``face_id`` of a triangulation into three.

    Adds one vertex inside the face, joined to its three corners; all existing
    half-edges, their ids and their rotations are preserved.
    """
    if g.role != ROLE_TRIANGULATION:
        raise GraphError("refine_face expects a dual-triangulation graph")
    if not (0 <= face_id < g.nf):
        raise GraphError(f"face id {face_id} out of range")
    cyc = g.faces[face_id]
    if len(cyc) != 3:
        raise GraphError("face is not a triangle")

    nh = g.nh
    w = g.nv
    src = np.concatenate([g.src, np.zeros(6, dtype=np.int64)])
    twin = np.concatenate([g.twin, np.zeros(6, dtype=np.int64)])
    nxt = np.concatenate([g.nxt, np.zeros(6, dtype=np.int64)])
    disp = np.concatenate([g.disp, np.zeros((6, 2), dtype=np.int64)])

    corner = [int(g.src[h]) for h in cyc]
    offset = [g.face_offset[h] for h in cyc]
    spoke = [nh + 2 * j for j in range(3)]        # corner_j -> w
    spoke_back = [nh + 2 * j + 1 for j in range(3)]  # w -> corner_j
    for j in range(3):
        src[spoke[j]] = corner[j]
        src[spoke_back[j]] = w
        twin[spoke[j]] = spoke_back[j]
        twin[spoke_back[j]] = spoke[j]
        disp[spoke[j]] = -offset[j]
        disp[spoke_back[j]] = offset[j]
    # splice each spoke between the face's two boundary half-edges at its corner
    for j in range(3):
        k_prev = int(cyc[(j - 1) % 3])
        nxt[twin[k_prev]] = spoke[j]
        nxt[spoke[j]] = int(cyc[j])
    # rotation at the new vertex runs against the face orbit (the orbit walks
    # the face clockwise, seen from inside)
    nxt[spoke_back[0]] = spoke_back[2]
    nxt[spoke_back[2]] = spoke_back[1]
    nxt[spoke_back[1]] = spoke_back[0]

    positions = None
    if g.positions is not None:
        corners = g.positions[corner] + np.array(offset)
        positions = np.vstack([g.positions, corners.mean(axis=0)[None, :]])
    return TorusGraph(g.nv + 1, src, twin, nxt, disp, role=g.role,
                      positions=positions, strict=g.strict)


# -- covering graph -------------------------------------------------------

def covering_graph(g):
    """The graph whose vertices are the undirected edges of ``g``.

    Two vertices are adjacent when the corresponding edges of ``g`` share an
    endpoint; bond percolation on ``g`` becomes site percolation here.  The
    result generally does not embed in the torus (the square-lattice covering
    graph already does not), so it is built without the genus-1 face checks
    and tagged with the general role.
    """
    canon = g.canonical_edges()
    edge_id = np.full(g.nh, -1, dtype=np.int64)
    edge_id[canon] = np.arange(canon.size)
    edge_id[g.twin[canon]] = np.arange(canon.size)
    # lift shift of the canonical edge copy incident to a fixed lift of src[h]
    shift = np.zeros((g.nh, 2), dtype=np.int64)
    noncanon = np.flatnonzero(np.arange(g.nh) >= g.twin)
    shift[noncanon] = g.disp[noncanon]

    edges = []
    for v in range(g.nv):
        at_v = np.flatnonzero(g.src == v)
        for a in range(at_v.size):
            for b in range(a + 1, at_v.size):
                h1, h2 = int(at_v[a]), int(at_v[b])
                d = shift[h2] - shift[h1]
                edges.append([int(edge_id[h1]), int(edge_id[h2]), int(d[0]), int(d[1])])

    positions = None
    if g.positions is not None:
        mid = (g.positions[g.src[canon]] + g.positions[g.src[g.twin[canon]]]
               + g.disp[canon]) / 2.0
        positions = mid
    spec = {"vertices": int(canon.size), "edges": edges, "role": ROLE_GENERAL}
    if positions is not None:
        spec["positions"] = [[repr(float(x)), repr(float(y))] for x, y in positions]
    return build_torus_graph(spec, strict=False)
