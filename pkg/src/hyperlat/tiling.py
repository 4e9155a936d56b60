"""Lattice patches and their structure tables.

Builders produce a `LatticeBall`: a combinatorial map plus per-face records
(created or boundary, kind), per-edge types, and for the square-decorated
families the crossing tables that tie site configurations to contours: every
complete black square carries two potential crossings, each joining the two
white faces across an opposite side pair.

Families:
  pq       {p,q} tiling, faces of degree p, q around each vertex
  m4n4     vertex cycle (m,4,n,4): m-gons and n-gons separated by squares
  sq2n     {4,2n} squares, alternating black/white around each vertex
  m4n4t    cantellated hexagonal torus (vertex cycle (3,4,6,4))
  lat4612  flag graph of the hexagonal lattice, faces of degree 4/6/12
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .growth import (KIND_BLACK, KIND_M, KIND_N, KIND_SQUARE, KIND_WHITE,
                     TYPE_A, TYPE_B, FanGrower, VertexCycle,
                     m4n4_cycle, pq_cycle, sq2n_cycle)
from .maps import CombinatorialMap, dual_map, make_map


class TilingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# families

@dataclass(frozen=True)
class LatticeFamily:
    tag: str
    params: tuple

    def vertex_cycle(self) -> VertexCycle:
        if self.tag == "pq":
            return pq_cycle(*self.params)
        if self.tag == "m4n4":
            return m4n4_cycle(*self.params)
        if self.tag == "sq2n":
            return sq2n_cycle(self.params[0])
        if self.tag == "m4n4t":
            return m4n4_cycle(3, 6)
        if self.tag == "lat4612":
            return VertexCycle("lat4612", (4, 6, 12), (0, 1, 2))
        raise TilingError(f"unknown family tag {self.tag!r}")

    @property
    def constrained(self) -> bool:
        """Whether the family carries black squares and crossing tables."""
        return self.tag in ("m4n4", "sq2n", "m4n4t")

    def describe(self) -> str:
        return f"{self.tag}({', '.join(str(x) for x in self.params)})"


def _check_not_spherical(cyc: VertexCycle):
    curv = sum(1.0 - 2.0 / d for d in cyc.degrees)
    if curv < 2.0 - 1e-12:
        raise TilingError("vertex cycle is spherical; patch growth expects a "
                          "Euclidean or hyperbolic tiling")


def pq_family(p: int, q: int) -> LatticeFamily:
    if p < 3 or q < 3:
        raise TilingError("pq family needs p >= 3 and q >= 3")
    fam = LatticeFamily("pq", (p, q))
    _check_not_spherical(fam.vertex_cycle())
    return fam


def m4n4_family(m: int, n: int) -> LatticeFamily:
    if m < 3 or n < 3:
        raise TilingError("m4n4 family needs m >= 3 and n >= 3")
    fam = LatticeFamily("m4n4", (m, n))
    _check_not_spherical(fam.vertex_cycle())
    return fam


def sq2n_family(n: int) -> LatticeFamily:
    if n < 3:
        raise TilingError("sq2n family needs n >= 3")
    return LatticeFamily("sq2n", (n,))


# ---------------------------------------------------------------------------
# structure tables

@dataclass
class ConstraintTables:
    """Aux white-face vertices and black-square crossings of a patch.

    Aux vertices are the white faces: complete ones first (by face id), then
    boundary classes (arcs of the open border that belong to one incomplete
    white face), by smallest dart.  Each complete black square contributes two
    potential crossings; crossing 2*i+s of black square i crosses the side
    pair (a0,a1), (a2,a3) of its corner gauge and joins the white faces
    behind those sides.
    """
    aux_anchor: np.ndarray
    aux_complete: np.ndarray
    aux_kind: np.ndarray
    aux_interior: np.ndarray
    aux_face: np.ndarray
    face_to_aux: dict
    black_faces: np.ndarray
    black_corners: np.ndarray
    cross_kind: np.ndarray
    cross_ends: np.ndarray
    cross_corners: np.ndarray
    cross_edges: np.ndarray
    edge_cross: np.ndarray
    aux_inc: list

    @property
    def num_aux(self) -> int:
        return len(self.aux_anchor)

    @property
    def num_black(self) -> int:
        return len(self.black_faces)

    @property
    def num_crossings(self) -> int:
        return len(self.cross_kind)

    def square_xref(self) -> dict:
        """Per complete black square: its two crossings as
        (kind, (aux_u, aux_v)) pairs, lower kind first."""
        out = {}
        for i, f in enumerate(self.black_faces):
            rows = []
            for c in (2 * i, 2 * i + 1):
                rows.append((int(self.cross_kind[c]),
                             (int(self.cross_ends[c, 0]),
                              int(self.cross_ends[c, 1]))))
            out[int(f)] = tuple(rows)
        return out


@dataclass
class DimerTables:
    """Edge classification of a lat4612 patch and its companion lattice."""
    edge_kind: np.ndarray        # 0 between-faces pair, 1 parallel, 2 crossing
    edge_direction: np.ndarray   # hexagonal edge direction, -1 if unknown
    companion: "LatticeBall"
    corner_of_edge: np.ndarray   # companion vertex per pair edge, else -1
    edge_of_corner: np.ndarray   # pair edge per companion vertex
    w_par: np.ndarray | None = None
    w_perp: np.ndarray | None = None
    edge_weight: np.ndarray | None = None


EDGE_PAIR, EDGE_PAR, EDGE_PERP = 0, 1, 2


@dataclass(frozen=True)
class BondGraph:
    """Plain vertex/edge view used by the bond-model routines."""
    num_vertices: int
    edges: tuple
    boundary: tuple


@dataclass
class LatticeBall:
    map: CombinatorialMap
    family: LatticeFamily
    radius: int
    face_created: np.ndarray
    face_kind: np.ndarray
    edge_type: np.ndarray
    boundary_vertices: np.ndarray
    base_vertex: int = 0
    tables: ConstraintTables | None = None
    vertex_color: np.ndarray | None = None
    dimer: DimerTables | None = None
    corner_map: np.ndarray | None = None
    _adj: list | None = field(default=None, repr=False)
    _edge_arr: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.map.num_vertices

    @property
    def num_edges(self) -> int:
        return self.map.num_edges

    def edge_array(self) -> np.ndarray:
        if self._edge_arr is None:
            e = np.empty((self.num_edges, 2), dtype=np.int64)
            for i in range(self.num_edges):
                e[i] = self.map.edge_endpoints(i)
            self._edge_arr = e
        return self._edge_arr

    def adjacency(self) -> list:
        if self._adj is None:
            nbr = [[] for _ in range(self.num_vertices)]
            for u, v in self.edge_array():
                nbr[int(u)].append(int(v))
                nbr[int(v)].append(int(u))
            self._adj = [np.array(a, dtype=np.int64) for a in nbr]
        return self._adj

    def bond_graph(self) -> BondGraph:
        edges = tuple((int(u), int(v)) for u, v in self.edge_array())
        return BondGraph(self.num_vertices, edges,
                         tuple(int(v) for v in self.boundary_vertices))

    def export_text(self) -> str:
        return export_ball(self)

    def ball_hash(self) -> str:
        return ball_hash(self)


# ---------------------------------------------------------------------------
# generic assembly: boundary, classes, crossings, labels

def _boundary_and_gaps(m: CombinatorialMap, L: int, face_created: np.ndarray):
    """Unsaturated vertices plus, per gap vertex, the darts flanking its
    single stretch of missing faces."""
    boundary = []
    fan_start = {}
    fan_end = {}
    sigma = m.next_around_vertex
    for v in range(m.num_vertices):
        orb = m.vertices[v]
        gaps = [d for d in orb if not face_created[m.face_of[sigma[d]]]]
        if len(gaps) > 1:
            raise TilingError(f"vertex {v} has {len(gaps)} boundary gaps")
        if gaps:
            boundary.append(v)
            fan_end[v] = gaps[0]
            fan_start[v] = int(sigma[gaps[0]])
        elif len(orb) < L:
            raise TilingError(f"vertex {v} has degree {len(orb)} < {L} "
                              "but no open sector")
    return np.array(boundary, dtype=np.int64), fan_start, fan_end


def _border_classes(m: CombinatorialMap, L: int, face_created: np.ndarray,
                    fan_start: dict, fan_end: dict):
    """Split each uncreated face orbit into arcs belonging to one incomplete
    tiling face each.  The orbit is cut at vertices whose gap spans more than
    one tiling slot, i.e. vertices with fewer than L darts."""
    class_arcs = []
    for f in range(m.num_faces):
        if face_created[f]:
            continue
        orb = m.faces[f]
        cuts = []
        for i, y in enumerate(orb):
            u = int(m.vertex_of[y])
            x = orb[i - 1]
            if int(m.twin[x]) != fan_end.get(u, -1) or y != fan_start.get(u, -2):
                raise TilingError("open border walk left the boundary gap")
            if m.vertex_degree(u) < L:
                cuts.append(i)
        if not cuts:
            class_arcs.append(list(orb))
            continue
        for j, c in enumerate(cuts):
            nxt = cuts[(j + 1) % len(cuts)]
            if nxt > c:
                class_arcs.append(orb[c:nxt])
            else:
                class_arcs.append(orb[c:] + orb[:nxt])
    class_arcs.sort(key=min)
    class_of_dart = {}
    for ci, arc in enumerate(class_arcs):
        for d in arc:
            class_of_dart[d] = ci
    return class_arcs, class_of_dart


def _white_kinds(tag: str):
    if tag in ("m4n4", "m4n4t"):
        return (KIND_M, KIND_N), KIND_SQUARE
    return (KIND_WHITE,), KIND_BLACK


def _vertex_slots(m, L, face_created, fan_start, fan_end, face_to_aux,
                  class_of_dart, n_complete, face_kind):
    """Per vertex, the L tiling slots counterclockwise: ('w', aux id or None)
    for white slots, ('b', None) for black.  Boundary fans start at the first
    filled slot after the gap; unfilled gap slots get their color from the
    alternation, and the first/last gap slot must come out white since it
    holds a boundary class."""
    slots = []
    for v in range(m.num_vertices):
        orb = m.vertices[v]
        k = len(orb)
        kinds = []   # known face kind per slot, or None
        auxes = []   # aux id per slot, or None
        is_class = []
        if v in fan_end:
            i0 = orb.index(fan_start[v])
            orb2 = orb[i0:] + orb[:i0]
            for i in range(1, k):
                f = int(m.face_of[orb2[i]])
                kinds.append(int(face_kind[f]))
                auxes.append(face_to_aux.get(f))
                is_class.append(False)
            g = L - (k - 1)
            arr = n_complete + class_of_dart[int(m.twin[fan_end[v]])]
            dep = n_complete + class_of_dart[fan_start[v]]
            gap = [arr] + [None] * (g - 2) + [dep] if g > 1 else [arr]
            if g == 1 and arr != dep:
                raise TilingError("single-slot gap split between classes")
            for a in gap:
                kinds.append(None)
                auxes.append(a)
                is_class.append(a is not None)
        else:
            for i in range(k):
                f = int(m.face_of[orb[(i + 1) % k]])
                kinds.append(int(face_kind[f]))
                auxes.append(face_to_aux.get(f))
                is_class.append(False)
        if len(kinds) != L:
            raise TilingError("slot count mismatch")
        j0 = next((j for j, kk in enumerate(kinds) if kk is not None), None)
        if j0 is None:
            raise TilingError(f"vertex {v} has no created face to anchor "
                              "its slot colors")
        entries = []
        for j in range(L):
            want = (kinds[j0] + j - j0) % 2
            if kinds[j] is not None and kinds[j] != want:
                raise TilingError(f"slot colors fail to alternate at {v}")
            if is_class[j] and want != KIND_WHITE:
                raise TilingError(f"boundary class occupies a black slot "
                                  f"at {v}")
            entries.append(('w', auxes[j]) if want == KIND_WHITE
                           else ('b', None))
        slots.append(entries)
    return slots


def _bipartition(m: CombinatorialMap, base: int) -> np.ndarray:
    color = np.full(m.num_vertices, -1, dtype=np.int64)
    color[base] = 0
    q = deque([base])
    nbr = [[] for _ in range(m.num_vertices)]
    for e in range(m.num_edges):
        u, v = m.edge_endpoints(e)
        nbr[u].append(v)
        nbr[v].append(u)
    while q:
        u = q.popleft()
        for v in nbr[u]:
            if color[v] < 0:
                color[v] = 1 - color[u]
                q.append(v)
            elif color[v] == color[u]:
                raise TilingError("vertex graph is not bipartite")
    if (color < 0).any():
        raise TilingError("vertex graph is disconnected")
    return color


def _propagate_labels(slots, vertex_color, n, num_aux):
    """Assign white-face labels 1..n from the gauge (aux 0 gets label 1):
    around a color-0 vertex labels decrease counterclockwise, around a
    color-1 vertex they increase, one step per white slot."""
    L = 2 * n
    label = np.zeros(num_aux, dtype=np.int64)
    aux_vertices = [[] for _ in range(num_aux)]
    for v, entries in enumerate(slots):
        for t, a in entries:
            if t == 'w' and a is not None:
                aux_vertices[a].append(v)
    if num_aux == 0:
        return label
    label[0] = 1
    q = deque(aux_vertices[0])
    while q:
        v = q.popleft()
        entries = slots[v]
        whites = [(pos, a) for pos, (t, a) in enumerate(entries) if t == 'w']
        known = [(pos, a) for pos, a in whites if a is not None and label[a]]
        if not known:
            continue
        p0, a0 = known[0]
        for pos, a in whites:
            if a is None:
                continue
            steps = ((pos - p0) % L) // 2
            if vertex_color[v] == 0:
                want = (int(label[a0]) - 1 - steps) % n + 1
            else:
                want = (int(label[a0]) - 1 + steps) % n + 1
            if label[a] == 0:
                label[a] = want
                q.extend(aux_vertices[a])
            elif label[a] != want:
                raise TilingError("white-face labels are inconsistent")
    if (label == 0).any():
        raise TilingError("white-face labeling did not reach every face")
    return label


def _build_tables(m, cyc, tag, face_created, face_kind, edge_type, base):
    """Aux universe, crossings, and (for sq2n) labels of a finished patch."""
    L = cyc.valence
    white_kinds, black_kind = _white_kinds(tag)
    boundary, fan_start, fan_end = _boundary_and_gaps(m, L, face_created)
    class_arcs, class_of_dart = _border_classes(m, L, face_created,
                                                fan_start, fan_end)

    complete_whites = [f for f in range(m.num_faces)
                       if face_created[f] and face_kind[f] in white_kinds]
    n_complete = len(complete_whites)
    num_aux = n_complete + len(class_arcs)
    face_to_aux = {f: i for i, f in enumerate(complete_whites)}
    aux_anchor = np.empty(num_aux, dtype=np.int64)
    aux_face = np.full(num_aux, -1, dtype=np.int64)
    aux_complete = np.zeros(num_aux, dtype=bool)
    for i, f in enumerate(complete_whites):
        aux_anchor[i] = m.faces[f][0]
        aux_face[i] = f
        aux_complete[i] = True
    for ci, arc in enumerate(class_arcs):
        aux_anchor[n_complete + ci] = min(arc)

    def aux_of_dart(x):
        f = int(m.face_of[x])
        if face_created[f]:
            if face_kind[f] not in white_kinds:
                raise TilingError("expected a white face behind a square side")
            return face_to_aux[f]
        return n_complete + class_of_dart[x]

    # labels first for sq2n: crossing kinds there are the shared labels
    vertex_color = None
    label = None
    if tag == "sq2n":
        n = L // 2
        slots = _vertex_slots(m, L, face_created, fan_start, fan_end,
                              face_to_aux, class_of_dart, n_complete,
                              face_kind)
        vertex_color = _bipartition(m, base)
        label = _propagate_labels(slots, vertex_color, n, num_aux)

    blacks = [f for f in range(m.num_faces)
              if face_created[f] and face_kind[f] == black_kind]
    B = len(blacks)
    black_faces = np.array(blacks, dtype=np.int64)
    black_corners = np.empty((B, 4), dtype=np.int64)
    cross_kind = np.empty(2 * B, dtype=np.int64)
    cross_ends = np.empty((2 * B, 2), dtype=np.int64)
    cross_corners = np.empty((2 * B, 4), dtype=np.int64)
    cross_edges = np.empty((2 * B, 2), dtype=np.int64)
    edge_cross = np.full(m.num_edges, -1, dtype=np.int64)

    for i, f in enumerate(blacks):
        orb = m.faces[f]
        if len(orb) != 4:
            raise TilingError("black face of degree != 4")
        c = [int(m.vertex_of[d]) for d in orb]
        black_corners[i] = c
        e4 = [int(m.edge_of[d]) for d in orb]
        ends = [aux_of_dart(int(m.twin[d])) for d in orb]
        if tag in ("m4n4", "m4n4t"):
            if edge_type[e4[0]] != edge_type[e4[2]] \
                    or edge_type[e4[1]] != edge_type[e4[3]] \
                    or edge_type[e4[0]] == edge_type[e4[1]]:
                raise TilingError("square side types fail to alternate")
            kx = 1 if edge_type[e4[0]] == TYPE_A else 2
            ky = 3 - kx
        else:
            kx, ky = int(label[ends[0]]), int(label[ends[1]])
            if kx != int(label[ends[2]]) or ky != int(label[ends[3]]):
                raise TilingError("opposite white faces carry unequal labels")
            n = L // 2
            if (kx - ky) % n != 1 and (ky - kx) % n != 1:
                raise TilingError("crossing labels are not consecutive")
        rows = [
            (kx, (ends[0], ends[2]), (c[0], c[1], c[2], c[3]), (e4[0], e4[2])),
            (ky, (ends[1], ends[3]), (c[1], c[2], c[3], c[0]), (e4[1], e4[3])),
        ]
        if rows[0][0] > rows[1][0]:
            rows.reverse()
        for s, (kk, ee, cc, xe) in enumerate(rows):
            ci = 2 * i + s
            cross_kind[ci] = kk
            cross_ends[ci] = ee
            cross_corners[ci] = cc
            cross_edges[ci] = xe
            for e in xe:
                if edge_cross[e] != -1:
                    raise TilingError("edge crossed by two different squares")
                edge_cross[e] = ci

    aux_kind = np.zeros(num_aux, dtype=np.int64)
    if tag == "sq2n":
        aux_kind[:] = label
    else:
        for i, f in enumerate(complete_whites):
            aux_kind[i] = 1 if face_kind[f] == KIND_M else 2
        for ci, arc in enumerate(class_arcs):
            kinds = {1 if edge_type[int(m.edge_of[d])] == TYPE_A else 2
                     for d in arc}
            if len(kinds) != 1:
                raise TilingError("boundary class mixes side types")
            aux_kind[n_complete + ci] = kinds.pop()

    aux_interior = np.zeros(num_aux, dtype=bool)
    for i, f in enumerate(complete_whites):
        aux_interior[i] = all(edge_cross[int(m.edge_of[d])] != -1
                              for d in m.faces[f])

    aux_inc = [[] for _ in range(num_aux)]
    for ci in range(2 * B):
        for a in cross_ends[ci]:
            aux_inc[int(a)].append(ci)

    tables = ConstraintTables(
        aux_anchor=aux_anchor, aux_complete=aux_complete, aux_kind=aux_kind,
        aux_interior=aux_interior, aux_face=aux_face, face_to_aux=face_to_aux,
        black_faces=black_faces, black_corners=black_corners,
        cross_kind=cross_kind, cross_ends=cross_ends,
        cross_corners=cross_corners, cross_edges=cross_edges,
        edge_cross=edge_cross, aux_inc=aux_inc)
    return tables, vertex_color, boundary


def _assemble(m, family, radius, face_created, face_kind, edge_type,
              base_vertex=0, corner_map=None, dimer=None) -> LatticeBall:
    cyc = family.vertex_cycle()
    if family.constrained:
        tables, vertex_color, boundary = _build_tables(
            m, cyc, family.tag, face_created, face_kind, edge_type,
            base_vertex)
    else:
        tables, vertex_color = None, None
        boundary, _, _ = _boundary_and_gaps(m, cyc.valence, face_created)
    return LatticeBall(
        map=m, family=family, radius=radius, face_created=face_created,
        face_kind=face_kind, edge_type=edge_type,
        boundary_vertices=boundary, base_vertex=base_vertex,
        tables=tables, vertex_color=vertex_color, dimer=dimer,
        corner_map=corner_map)


# ---------------------------------------------------------------------------
# grown balls

def _trivial_ball(family: LatticeFamily) -> LatticeBall:
    m = make_map([], [], isolated=1)
    return LatticeBall(
        map=m, family=family, radius=0,
        face_created=np.zeros(0, dtype=bool),
        face_kind=np.zeros(0, dtype=np.int64),
        edge_type=np.zeros(0, dtype=np.int64),
        boundary_vertices=np.array([0], dtype=np.int64))


def _grow_ball(family: LatticeFamily, radius: int) -> LatticeBall:
    if radius < 0:
        raise TilingError("radius must be >= 0")
    if radius == 0:
        return _trivial_ball(family)
    cyc = family.vertex_cycle()
    g = FanGrower(cyc)
    g.grow(radius)
    g.close_black_faces()

    nd = len(g.origin)
    sigma = [0] * nd
    for fan in g.fan_darts:
        k = len(fan)
        for i, d in enumerate(fan):
            sigma[d] = fan[(i + 1) % k]
    m = make_map(sigma, g.twin)
    if m.num_vertices != g.num_vertices:
        raise TilingError("vertex count changed in finalization")

    face_created = np.zeros(m.num_faces, dtype=bool)
    face_kind = np.full(m.num_faces, -1, dtype=np.int64)
    for rec in g.faces:
        f = int(m.face_of[rec.anchor])
        if face_created[f] or m.face_degree(f) != rec.degree:
            raise TilingError("face orbit does not match its record")
        face_created[f] = True
        face_kind[f] = rec.kind
    edge_type = np.array(g.edge_type, dtype=np.int64)
    return _assemble(m, family, radius, face_created, face_kind, edge_type)


def build_pq_ball(p: int, q: int, radius: int) -> LatticeBall:
    """Ball of the {p,q} tiling: `radius` rounds of saturating, in creation
    order, every vertex present at the start of the round."""
    return _grow_ball(pq_family(p, q), radius)


def build_m4n4_ball(m: int, n: int, radius: int) -> LatticeBall:
    """Ball of the tiling with vertex cycle (m,4,n,4).  After the saturation
    rounds, missing black squares are created until every edge borders one."""
    return _grow_ball(m4n4_family(m, n), radius)


def build_square_tiling_ball(n: int, radius: int) -> LatticeBall:
    """Ball of {4,2n} with alternating black/white squares, white faces
    labeled 1..n.  Every edge borders a complete black square."""
    return _grow_ball(sq2n_family(n), radius)


def label_white_faces(ball: LatticeBall) -> np.ndarray:
    """Recompute white-face labels of a {4,2n} ball from the gauge and check
    consistency; returns one label per aux white face."""
    if ball.family.tag != "sq2n":
        raise TilingError("white-face labels are defined for sq2n patches")
    t = ball.tables
    m = ball.map
    cyc = ball.family.vertex_cycle()
    L = cyc.valence
    boundary, fan_start, fan_end = _boundary_and_gaps(m, L, ball.face_created)
    class_arcs, class_of_dart = _border_classes(m, L, ball.face_created,
                                                fan_start, fan_end)
    n_complete = int(ball.tables.aux_complete.sum())
    slots = _vertex_slots(m, L, ball.face_created, fan_start, fan_end,
                          t.face_to_aux, class_of_dart, n_complete,
                          ball.face_kind)
    color = _bipartition(m, ball.base_vertex)
    label = _propagate_labels(slots, color, L // 2, t.num_aux)
    if not np.array_equal(label, t.aux_kind):
        raise TilingError("stored labels disagree with propagation")
    return label


# ---------------------------------------------------------------------------
# cantellation

def _cantellate_map(m: CombinatorialMap, face_created, p: int, q: int,
                    family: LatticeFamily, radius: int) -> LatticeBall:
    """Corner lattice: one vertex per (vertex, created face) corner, an
    m-type edge joining consecutive corners around each vertex, an n-type
    edge joining consecutive corners around each created face.  m-gons are
    the old vertices (degree q), n-gons the old faces (degree p), squares
    the old edges."""
    sigma = m.next_around_vertex
    sigma_inv = np.empty(m.num_darts, dtype=np.int64)
    sigma_inv[sigma] = np.arange(m.num_darts)
    created_side = face_created[np.asarray(m.face_of)]

    corners = [d for d in range(m.num_darts) if created_side[d]]
    if not corners:
        raise TilingError("cantellation needs at least one created face")

    # edge keys in deterministic order; m-edge of dart d joins corner(d) to
    # corner(sigma d), n-edge of dart d joins corner(d) to corner(sigma twin d)
    edge_list = []
    m_edge = {}
    n_edge = {}
    for d in corners:
        if created_side[int(sigma[d])]:
            m_edge[d] = len(edge_list)
            edge_list.append(("m", d))
        n_edge[d] = len(edge_list)
        edge_list.append(("n", d))

    twin = []
    etype = []
    for kind, d in edge_list:
        base = 2 * len(etype)
        twin += [base + 1, base]
        etype.append(TYPE_A if kind == "m" else TYPE_B)

    fans = [[] for _ in corners]
    for i, d in enumerate(corners):
        fan = []
        if d in m_edge:
            fan.append(2 * m_edge[d])
        fan.append(2 * n_edge[d])
        z = int(m.twin[sigma_inv[d]])          # n-edge arriving inside face(d)
        fan.append(2 * n_edge[z] + 1)
        y = int(sigma_inv[d])
        if y in m_edge:
            fan.append(2 * m_edge[y] + 1)
        fans[i] = fan

    nd = 2 * len(edge_list)
    new_sigma = [0] * nd
    origin = [0] * nd
    for i, fan in enumerate(fans):
        for j, dd in enumerate(fan):
            new_sigma[dd] = fan[(j + 1) % len(fan)]
            origin[dd] = i
    # twins' origins: dart 2e at corner(d); 2e+1 at the other end
    cm = make_map(new_sigma, twin)

    # face classification by the side types around each orbit
    face_ck = np.zeros(cm.num_faces, dtype=bool)
    face_kk = np.full(cm.num_faces, -1, dtype=np.int64)
    open_orbits = 0
    for f in range(cm.num_faces):
        orb = cm.faces[f]
        kinds = {edge_list[d // 2][0] for d in orb}
        deg = len(orb)
        if kinds == {"m"} and deg == q:
            face_ck[f] = True
            face_kk[f] = KIND_M
        elif kinds == {"n"} and deg == p:
            face_ck[f] = True
            face_kk[f] = KIND_N
        elif kinds == {"m", "n"} and deg == 4:
            face_ck[f] = True
            face_kk[f] = KIND_SQUARE
        else:
            open_orbits += 1
    if open_orbits > 1:
        raise TilingError("cantellation produced several open borders")

    # map input dart -> output vertex id (of the combinatorial map)
    corner_map = np.full(m.num_darts, -1, dtype=np.int64)
    for i, d in enumerate(corners):
        corner_map[d] = int(cm.vertex_of[fans[i][0]])

    return _assemble(cm, family, radius, face_ck, face_kk,
                     np.array(etype, dtype=np.int64),
                     base_vertex=int(corner_map[corners[0]]),
                     corner_map=corner_map)


def cantellate(ball: LatticeBall) -> LatticeBall:
    """Corner lattice of a {p,q} patch: a ball of the (q,4,p,4) tiling whose
    m-gons sit at the old vertices and n-gons at the old faces.  Only corners
    of complete faces survive, so the output border can be ragged and its
    squares near the border may be incomplete."""
    if ball.family.tag != "pq":
        raise TilingError("cantellate expects a pq ball")
    p, q = ball.family.params
    return _cantellate_map(ball.map, ball.face_created, p, q,
                           m4n4_family(q, p), ball.radius)


# ---------------------------------------------------------------------------
# hexagonal torus, flag graph, companion

def hexagonal_torus(k: int, l: int) -> CombinatorialMap:
    """k*l hexagonal torus: cells (x,y) hold one u and one w vertex joined by
    a direction-0 edge; direction 1 joins u(x,y) to w(x-1,y), direction 2
    joins u(x,y) to w(x,y-1)."""
    if k < 1 or l < 1:
        raise TilingError("torus needs k >= 1 and l >= 1")

    def eid(x, y, c):
        return 3 * ((x % k) + k * (y % l)) + c

    ne = 3 * k * l
    twin = np.empty(2 * ne, dtype=np.int64)
    twin[0::2] = np.arange(ne) * 2 + 1
    twin[1::2] = np.arange(ne) * 2
    sigma = np.empty(2 * ne, dtype=np.int64)
    for y in range(l):
        for x in range(k):
            fan_u = [2 * eid(x, y, 0), 2 * eid(x, y, 1), 2 * eid(x, y, 2)]
            fan_w = [2 * eid(x, y, 0) + 1, 2 * eid(x + 1, y, 1) + 1,
                     2 * eid(x, y + 1, 2) + 1]
            for fan in (fan_u, fan_w):
                for i, d in enumerate(fan):
                    sigma[d] = fan[(i + 1) % 3]
    m = make_map(sigma, twin)
    if m.num_faces != k * l or any(m.face_degree(f) != 6
                                   for f in range(m.num_faces)):
        raise TilingError("hexagonal torus faces are wrong")
    if m.euler_characteristic() != 0:
        raise TilingError("hexagonal torus is not a torus")
    return m


_FLAG_ROT = {0: (0, 1, 2), 1: (0, 2, 1)}


def _flag_ball(m: CombinatorialMap, face_created, family: LatticeFamily,
               radius: int, p: int, q: int, companion_family: LatticeFamily,
               edge_dir=None) -> LatticeBall:
    """Flag graph of a map: one vertex per (dart, side) flag whose side face
    is created, a parallel edge pair along every old edge, a perpendicular
    edge across every old dart between two created faces, and a pair edge
    across every corner.  Faces have degree 4 (old edges), 6 (old vertices),
    12 (old faces)."""
    sigma = m.next_around_vertex
    sigma_inv = np.empty(m.num_darts, dtype=np.int64)
    sigma_inv[sigma] = np.arange(m.num_darts)

    def side_face(d, s):
        return int(m.face_of[d]) if s == 0 else int(m.face_of[sigma[d]])

    flag_exists = {}
    flags = []
    for d in range(m.num_darts):
        for s in (0, 1):
            if face_created[side_face(d, s)]:
                flag_exists[(d, s)] = len(flags)
                flags.append((d, s))

    def par_partner(d, s):
        return (int(m.twin[d]), 1 - s)

    def pair_partner(d, s):
        return (int(sigma_inv[d]), 1) if s == 0 else (int(sigma[d]), 0)

    # enumerate edges deterministically: per flag, par then perp then pair,
    # each once (created when first endpoint is visited)
    edge_index = {}
    edge_rows = []   # (kind, flag_a, flag_b)

    def add_edge(kind, fa, fb):
        key = (kind, min(fa, fb), max(fa, fb))
        if key not in edge_index:
            edge_index[key] = len(edge_rows)
            edge_rows.append((kind, key[1], key[2]))
        return edge_index[key]

    fan_edges = []
    for fi, (d, s) in enumerate(flags):
        row = []
        pa = flag_exists[par_partner(d, s)]
        row.append((EDGE_PAR, add_edge(EDGE_PAR, fi, pa)))
        other = flag_exists.get((d, 1 - s))
        if other is not None:
            row.append((EDGE_PERP, add_edge(EDGE_PERP, fi, other)))
        qq = flag_exists[pair_partner(d, s)]
        row.append((EDGE_PAIR, add_edge(EDGE_PAIR, fi, qq)))
        fan_edges.append(row)

    nd = 2 * len(edge_rows)
    twin = np.empty(nd, dtype=np.int64)
    twin[0::2] = np.arange(len(edge_rows)) * 2 + 1
    twin[1::2] = np.arange(len(edge_rows)) * 2
    new_sigma = np.empty(nd, dtype=np.int64)
    for fi, (d, s) in enumerate(flags):
        darts = []
        for kind, e in fan_edges[fi]:
            a = edge_rows[e][1]
            darts.append(2 * e if a == fi else 2 * e + 1)
        order = _FLAG_ROT[s]
        have = {fan_edges[fi][j][0]: darts[j] for j in range(len(darts))}
        fan = [have[kk] for kk in order if kk in have]
        for i, dd in enumerate(fan):
            new_sigma[dd] = fan[(i + 1) % len(fan)]
    fm = make_map(new_sigma, twin)

    # classify faces
    face_ck = np.zeros(fm.num_faces, dtype=bool)
    face_kk = np.full(fm.num_faces, -1, dtype=np.int64)
    sat = np.zeros(m.num_vertices, dtype=bool)
    for v in range(m.num_vertices):
        orb = m.vertices[v]
        sat[v] = all(face_created[int(m.face_of[sigma[d]])] for d in orb)
    for f in range(fm.num_faces):
        orb = fm.faces[f]
        kinds = {edge_rows[dd // 2][0] for dd in orb}
        deg = len(orb)
        d0, s0 = flags[edge_rows[orb[0] // 2][1]]
        if kinds == {EDGE_PAR, EDGE_PERP} and deg == 4:
            # square of the old edge under flag (d0, s0)
            e = int(m.edge_of[d0])
            da, db = m.edges[e]
            if face_created[int(m.face_of[da])] \
                    and face_created[int(m.face_of[db])] \
                    and face_created[int(m.face_of[sigma[da]])] \
                    and face_created[int(m.face_of[sigma[db]])]:
                face_ck[f] = True
                face_kk[f] = 0
        elif kinds == {EDGE_PERP, EDGE_PAIR} and deg == 2 * m.vertex_degree(
                int(m.vertex_of[d0])):
            if sat[int(m.vertex_of[d0])]:
                face_ck[f] = True
                face_kk[f] = 1
        elif kinds == {EDGE_PAR, EDGE_PAIR}:
            ff = side_face(d0, s0)
            if face_created[ff] and deg == 2 * m.face_degree(ff):
                face_ck[f] = True
                face_kk[f] = 2

    edge_kind = np.array([r[0] for r in edge_rows], dtype=np.int64)
    edge_type = np.zeros(len(edge_rows), dtype=np.int64)
    if edge_dir is None:
        edge_direction = np.full(len(edge_rows), -1, dtype=np.int64)
    else:
        edge_direction = np.empty(len(edge_rows), dtype=np.int64)
        for e, (kind, fa, fb) in enumerate(edge_rows):
            if kind == EDGE_PAIR:
                edge_direction[e] = -1
            else:
                edge_direction[e] = edge_dir[int(m.edge_of[flags[fa][0]])]

    # companion lattice: corner per dart of the base map; the pair edge of a
    # corner corresponds to one companion vertex
    comp = _cantellate_map(m, face_created, p, q, companion_family, radius)
    corner_of_edge = np.full(len(edge_rows), -1, dtype=np.int64)
    edge_of_corner = np.full(comp.num_vertices, -1, dtype=np.int64)
    for e, (kind, fa, fb) in enumerate(edge_rows):
        if kind != EDGE_PAIR:
            continue
        d, s = flags[fa]
        if s == 1:
            d, s = flags[fb]
        if s != 0:
            raise TilingError("pair edge without a side-0 flag")
        cv = int(comp.corner_map[d])
        corner_of_edge[e] = cv
        edge_of_corner[cv] = e
    if (edge_of_corner < 0).any():
        raise TilingError("companion vertex without a pair edge")

    ball = LatticeBall(
        map=fm, family=family, radius=radius,
        face_created=face_ck, face_kind=face_kk, edge_type=edge_type,
        boundary_vertices=np.array(
            [v for v in range(fm.num_vertices)
             if not all(face_ck[int(fm.face_of[fm.next_around_vertex[d]])]
                        for d in fm.vertices[v])], dtype=np.int64),
        dimer=DimerTables(edge_kind=edge_kind, edge_direction=edge_direction,
                          companion=comp, corner_of_edge=corner_of_edge,
                          edge_of_corner=edge_of_corner))
    return ball


def flag_graph(ball: LatticeBall) -> LatticeBall:
    """Flag graph of a {p,q} patch (one vertex per corner side)."""
    if ball.family.tag != "pq":
        raise TilingError("flag_graph expects a pq ball")
    p, q = ball.family.params
    fam = LatticeFamily("lat4612", (p, q))
    return _flag_ball(ball.map, ball.face_created, fam, ball.radius,
                      p, q, m4n4_family(q, p))


def build_torus_4612(k: int, l: int, weights=None) -> LatticeBall:
    """Flag graph of the k*l hexagonal torus: the [4,6,12] lattice with its
    hexagonal-edge directions, companion corner lattice, and optional
    direction-wise edge weights (`weights` needs .w_par and .w_perp arrays
    of three positive floats; pair edges weigh 1)."""
    hm = hexagonal_torus(k, l)
    created = np.ones(hm.num_faces, dtype=bool)
    edge_dir = np.arange(hm.num_edges, dtype=np.int64) % 3
    ball = _flag_ball(hm, created, LatticeFamily("lat4612", (k, l)), 0,
                      6, 3, LatticeFamily("m4n4t", (k, l)),
                      edge_dir=edge_dir)
    counts = {}
    for f in range(ball.map.num_faces):
        if ball.face_created[f]:
            counts[ball.map.face_degree(f)] = counts.get(
                ball.map.face_degree(f), 0) + 1
    if counts != {4: 3 * k * l, 6: 2 * k * l, 12: k * l}:
        raise TilingError(f"bad face census on the flag torus: {counts}")
    if weights is not None:
        set_dimer_weights(ball, weights)
    return ball


def set_dimer_weights(ball: LatticeBall, weights) -> None:
    """Attach direction-invariant weights to a lat4612 patch: pair edges get
    1, parallel/perpendicular edges get w_par/w_perp of their direction."""
    dt = ball.dimer
    if dt is None:
        raise TilingError("ball has no flag structure")
    w_par = np.asarray(weights.w_par, dtype=float)
    w_perp = np.asarray(weights.w_perp, dtype=float)
    if w_par.shape != (3,) or w_perp.shape != (3,):
        raise TilingError("weights need three directions")
    ew = np.ones(len(dt.edge_kind), dtype=float)
    for e, kind in enumerate(dt.edge_kind):
        d = int(dt.edge_direction[e])
        if kind == EDGE_PAR:
            ew[e] = w_par[d]
        elif kind == EDGE_PERP:
            ew[e] = w_perp[d]
    dt.w_par, dt.w_perp, dt.edge_weight = w_par, w_perp, ew


# ---------------------------------------------------------------------------
# serialization

def export_ball(ball: LatticeBall) -> str:
    m = ball.map
    fam = ball.family
    lines = [f"FAMILY {fam.tag} {' '.join(str(x) for x in fam.params)} "
             f"R={ball.radius}"]
    lines.append("DARTS")
    lines.append(str(m.num_darts))
    lines.append("TWIN")
    for d in range(m.num_darts):
        lines.append(f"{d} {int(m.twin[d])}")
    lines.append("NEXT")
    for d in range(m.num_darts):
        lines.append(f"{d} {int(m.next_around_vertex[d])}")
    lines.append("FACECOLOR")
    for f in range(m.num_faces):
        if ball.face_created[f]:
            lines.append(f"{m.faces[f][0]} {int(ball.face_kind[f])}")
    lines.append("LABELS")
    if fam.tag == "sq2n" and ball.tables is not None:
        for i in range(ball.tables.num_aux):
            lines.append(f"{int(ball.tables.aux_anchor[i])} "
                         f"{int(ball.tables.aux_kind[i])}")
    lines.append("XREF")
    if ball.tables is not None:
        t = ball.tables
        for i in range(t.num_black):
            f = int(t.black_faces[i])
            parts = [str(m.faces[f][0])]
            for c in (2 * i, 2 * i + 1):
                parts += [str(int(t.cross_kind[c])),
                          str(int(t.aux_anchor[t.cross_ends[c, 0]])),
                          str(int(t.aux_anchor[t.cross_ends[c, 1]]))]
            lines.append(" ".join(parts))
    elif fam.tag == "lat4612" and ball.dimer is not None:
        for e in range(ball.num_edges):
            lines.append(f"{e} {int(ball.dimer.edge_kind[e])} "
                         f"{int(ball.dimer.edge_direction[e])}")
    return "\n".join(lines) + "\n"


def ball_hash(ball: LatticeBall) -> str:
    return hashlib.blake2b(export_ball(ball).encode(),
                           digest_size=8).hexdigest()


def _parse_sections(text: str):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("FAMILY "):
        raise TilingError("ball file must start with a FAMILY line")
    head = lines[0].split()
    tag = head[1]
    if not head[-1].startswith("R="):
        raise TilingError("FAMILY line must end with R=<radius>")
    radius = int(head[-1][2:])
    params = tuple(int(x) for x in head[2:-1])
    names = ("DARTS", "TWIN", "NEXT", "FACECOLOR", "LABELS", "XREF")
    sections = {}
    cur = None
    for ln in lines[1:]:
        s = ln.strip()
        if not s:
            continue
        if s in names:
            if s in sections:
                raise TilingError(f"duplicate section {s}")
            cur = s
            sections[s] = []
        elif cur is None:
            raise TilingError("content before the first section")
        else:
            sections[cur].append([int(x) for x in s.split()])
    for nm in names:
        sections.setdefault(nm, [])
    return tag, params, radius, sections


def import_ball(text: str) -> LatticeBall:
    """Rebuild a ball from its text export; the result exports byte-equal."""
    tag, params, radius, sec = _parse_sections(text)
    if tag == "lat4612":
        ball = (build_torus_4612(*params) if radius == 0
                else flag_graph(build_pq_ball(*params, radius)))
        if export_ball(ball) != text:
            raise TilingError("lat4612 file disagrees with reconstruction")
        return ball

    if not sec["DARTS"] or len(sec["DARTS"][0]) != 1:
        raise TilingError("bad DARTS section")
    nd = sec["DARTS"][0][0]
    if nd == 0:
        fam = LatticeFamily(tag, params)
        ball = _trivial_ball(fam)
        if export_ball(ball) != text:
            raise TilingError("file disagrees with reconstruction")
        return ball
    twin = np.zeros(nd, dtype=np.int64)
    sigma = np.zeros(nd, dtype=np.int64)
    if len(sec["TWIN"]) != nd or len(sec["NEXT"]) != nd:
        raise TilingError("TWIN/NEXT must list every dart")
    for d, t in sec["TWIN"]:
        twin[d] = t
    for d, s in sec["NEXT"]:
        sigma[d] = s
    m = make_map(sigma, twin)

    fam = LatticeFamily(tag, params)
    face_created = np.zeros(m.num_faces, dtype=bool)
    face_kind = np.full(m.num_faces, -1, dtype=np.int64)
    for anchor, kind in sec["FACECOLOR"]:
        f = int(m.face_of[anchor])
        if m.faces[f][0] != anchor or face_created[f]:
            raise TilingError("FACECOLOR anchor is not a fresh face minimum")
        face_created[f] = True
        face_kind[f] = kind

    # edge types: from created white neighbours, then from crossing kinds
    edge_type = np.zeros(m.num_edges, dtype=np.int64)
    if tag in ("m4n4", "m4n4t"):
        known = np.zeros(m.num_edges, dtype=bool)
        for e in range(m.num_edges):
            for d in m.edges[e]:
                f = int(m.face_of[d])
                if face_created[f] and face_kind[f] in (KIND_M, KIND_N):
                    t = TYPE_A if face_kind[f] == KIND_M else TYPE_B
                    if known[e] and edge_type[e] != t:
                        raise TilingError("edge flanked by both gon kinds")
                    edge_type[e] = t
                    known[e] = True
        if not known.all():
            _types_from_xref(m, sec["XREF"], edge_type, known)
            if not known.all():
                raise TilingError("cannot recover every edge type")

    ball = _assemble(m, fam, radius, face_created, face_kind, edge_type)
    if export_ball(ball) != text:
        raise TilingError("file disagrees with reconstruction")
    return ball


def _types_from_xref(m, xref_rows, edge_type, known):
    """Recover side types of squares all of whose neighbouring gons sit on
    the open border.  The file lists each square's crossings sorted by kind,
    so the gauge (which side pair is the kind-1 pair) is pinned by any side
    whose type is already known; rows with no known side are committed on
    the first consistent gauge, and the byte round-trip check at the end of
    the import rejects a wrong guess."""
    rows = []
    for row in xref_rows:
        f = int(m.face_of[row[0]])
        orb = m.faces[f]
        if len(orb) != 4:
            raise TilingError("XREF anchor is not a square")
        if row[1] == row[4]:
            raise TilingError("square crossing kinds must differ")
        rows.append(([int(m.edge_of[d]) for d in orb], row[1], row[4]))

    def options(ex, k1, k2):
        opts = []
        for ka, kb in ((k1, k2), (k2, k1)):
            ta = TYPE_A if ka == 1 else TYPE_B
            tb = TYPE_A if kb == 1 else TYPE_B
            plan = ((ex[0], ta), (ex[2], ta), (ex[1], tb), (ex[3], tb))
            if all(not known[e] or edge_type[e] == t for e, t in plan):
                opts.append(plan)
        return opts

    pending = rows
    while pending:
        progress = False
        nxt = []
        for ex, k1, k2 in pending:
            if all(known[e] for e in ex):
                if not options(ex, k1, k2):
                    raise TilingError("XREF kinds contradict side types")
                progress = True
                continue
            opts = options(ex, k1, k2)
            if not opts:
                raise TilingError("XREF kinds contradict side types")
            if len(opts) == 1:
                for e, t in opts[0]:
                    edge_type[e] = t
                    known[e] = True
                progress = True
            else:
                nxt.append((ex, k1, k2))
        if not progress and nxt:
            ex, k1, k2 = nxt.pop(0)
            for e, t in options(ex, k1, k2)[0]:
                edge_type[e] = t
                known[e] = True
        pending = nxt
