"""Fan-based ball growth for tilings with one vertex type (internal engine).

Grows a simply connected patch face by face.  Each vertex keeps a linear
counterclockwise fan of incident darts plus the faces filled between
consecutive darts; `phase` pins slot 0 of the fan to an index of the vertex
cycle (the cyclic list of face degrees around a vertex).  All face creation
happens at a vertex's back slot: the glue walk collects the part of the new
face's boundary that already exists, a chain of new edges closes it.

Gauge conventions used throughout the package:
  - next_around_vertex (sigma) rotates counterclockwise,
  - face orbits follow d -> sigma[twin[d]] and keep the face on the right
    of each dart, so the face between consecutive fan darts (d_i, d_{i+1})
    is the orbit of d_{i+1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class GrowthError(ValueError):
    pass


# face kinds, per family:
#   PQ      : every face kind 0
#   M4N4    : 0 = m-gon, 1 = square (black), 2 = n-gon
#   SQ2N    : 0 = black square, 1 = white square
KIND_M, KIND_SQUARE, KIND_N = 0, 1, 2
KIND_BLACK, KIND_WHITE = 0, 1

# dart edge types for M4N4 chains: an a-edge borders an m-gon and a square,
# a b-edge borders an n-gon and a square.
TYPE_A, TYPE_B = 0, 1

# new-vertex phase for M4N4, keyed by (type of incoming edge, type of
# outgoing edge) around the face under construction
_M4N4_PHASE = {(TYPE_A, TYPE_A): 0, (TYPE_A, TYPE_B): 1,
               (TYPE_B, TYPE_B): 2, (TYPE_B, TYPE_A): 3}


@dataclass(frozen=True)
class VertexCycle:
    """Cyclic environment of a vertex: face degree and kind per slot."""
    tag: str
    degrees: tuple
    kinds: tuple

    @property
    def valence(self) -> int:
        return len(self.degrees)


def pq_cycle(p: int, q: int) -> VertexCycle:
    return VertexCycle("pq", (p,) * q, (0,) * q)


def m4n4_cycle(m: int, n: int) -> VertexCycle:
    return VertexCycle("m4n4", (m, 4, n, 4),
                       (KIND_M, KIND_SQUARE, KIND_N, KIND_SQUARE))


def sq2n_cycle(n: int) -> VertexCycle:
    return VertexCycle("sq2n", (4,) * (2 * n),
                       tuple(i % 2 for i in range(2 * n)))


@dataclass
class FaceRec:
    anchor: int   # dart whose face orbit is this face
    degree: int
    kind: int


class FanGrower:
    def __init__(self, cyc: VertexCycle):
        self.cyc = cyc
        self.origin: list[int] = []       # per dart
        self.twin: list[int] = []         # per dart
        self.edge_type: list[int] = []    # per edge (m4n4 only; else 0)
        self.fan_darts: list[list[int]] = []
        self.fan_faces: list[list[int]] = []
        self.phase: list[int] = []
        self.faces: list[FaceRec] = []
        self._new_vertex(0)               # base vertex

    # -- bookkeeping ------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.fan_darts)

    @property
    def num_edges(self) -> int:
        return len(self.edge_type)

    def _new_vertex(self, phase: int) -> int:
        self.fan_darts.append([])
        self.fan_faces.append([])
        self.phase.append(phase)
        return len(self.fan_darts) - 1

    def _new_edge(self, u: int, v: int, etype: int) -> tuple[int, int]:
        d = len(self.origin)
        self.origin += [u, v]
        self.twin += [d + 1, d]
        self.edge_type.append(etype)
        return d, d + 1

    def _saturated(self, v: int) -> bool:
        return len(self.fan_faces[v]) == self.cyc.valence

    def _closing(self, v: int) -> bool:
        # one open slot left: the wrap between fan end and fan start
        return (len(self.fan_darts[v]) == self.cyc.valence
                and len(self.fan_faces[v]) == self.cyc.valence - 1)

    def _slot_index(self, v: int, slot: int) -> int:
        return (self.phase[v] + slot) % self.cyc.valence

    def _check_slot(self, v: int, slot: int, degree: int, kind: int):
        c = self._slot_index(v, slot)
        if self.cyc.degrees[c] != degree or self.cyc.kinds[c] != kind:
            raise GrowthError(
                f"slot mismatch at vertex {v}: slot {slot} expects degree "
                f"{self.cyc.degrees[c]} kind {self.cyc.kinds[c]}, "
                f"face has degree {degree} kind {kind}")

    def dart_slot_after(self, d: int) -> int:
        """Cycle index of the fan slot counterclockwise of dart d."""
        v = self.origin[d]
        return self._slot_index(v, self.fan_darts[v].index(d))

    # -- face creation ----------------------------------------------------

    def create_face(self, v: int) -> int:
        """Create the face in v's back slot (the first unfilled slot)."""
        L = self.cyc.valence
        nf = len(self.fan_faces[v])
        if nf >= L:
            raise GrowthError(f"vertex {v} already saturated")
        cyc_idx = self._slot_index(v, nf)
        D = self.cyc.degrees[cyc_idx]
        kind = self.cyc.kinds[cyc_idx]
        fid = len(self.faces)

        # collect existing boundary: `back` walks against the face orbit
        # from v's fan end, `fwd` walks along it from v's fan start when the
        # new face is v's own wrap slot
        back: list[int] = []
        fwd: list[int] = []
        if self.fan_darts[v]:
            back.append(self.fan_darts[v][-1])
            while True:
                t = self.twin[back[-1]]
                u = self.origin[t]
                fu = self.fan_darts[u]
                if t != fu[0]:
                    raise GrowthError("glue walk did not reach a fan start")
                if self._closing(u):
                    self._check_slot(u, len(self.fan_faces[u]), D, kind)
                    back.append(fu[-1])
                else:
                    break
            if self._closing(v):
                fwd.append(self.fan_darts[v][0])
                while True:
                    t = self.twin[fwd[-1]]
                    u = self.origin[t]
                    fu = self.fan_darts[u]
                    if t != fu[-1]:
                        raise GrowthError("glue walk did not reach a fan end")
                    if self._closing(u):
                        self._check_slot(u, len(self.fan_faces[u]), D, kind)
                        fwd.append(fu[0])
                    else:
                        break

        glued = len(back) + len(fwd)
        new_cnt = D - glued
        if new_cnt < 1:
            raise GrowthError("face boundary already closed")
        head = self.origin[self.twin[fwd[-1]]] if fwd else v
        tail = self.origin[self.twin[back[-1]]] if back else v
        seed = not back and not fwd

        etypes = self._chain_edge_types(kind, new_cnt, back, fwd)

        # build the chain of new edges from head to tail
        chain: list[int] = []
        prev = head
        for i in range(new_cnt):
            if i == new_cnt - 1:
                nxt = tail
            else:
                nxt = self._new_vertex(0)   # phase fixed right below
            d_out, d_in = self._new_edge(prev, nxt, etypes[i])
            if i > 0:
                x = prev
                self.fan_darts[x] = [self.twin[chain[-1]], d_out]
                self.fan_faces[x] = [fid]
                self.phase[x] = self._new_vertex_phase(
                    kind, cyc_idx, etypes[i - 1], etypes[i])
            chain.append(d_out)
            prev = nxt

        # attach at head: the new face is head's back slot
        if not seed:
            self._check_slot(head, len(self.fan_faces[head]), D, kind)
        self.fan_darts[head].append(chain[0])
        self.fan_faces[head].append(fid)

        # attach at tail: prepend, shifting the fan phase back by one
        last_in = self.twin[chain[-1]]
        if seed:
            self.fan_darts[v].insert(0, last_in)
        else:
            self._check_slot(tail, -1, D, kind)
            self.fan_darts[tail].insert(0, last_in)
            self.fan_faces[tail].insert(0, fid)
            self.phase[tail] = (self.phase[tail] - 1) % L

        # wrap fills at pass-through vertices (and at v itself if closing)
        if fwd:
            self.fan_faces[v].append(fid)
            for d in fwd[1:]:
                self.fan_faces[self.origin[d]].append(fid)
        for d in back[1:]:
            self.fan_faces[self.origin[d]].append(fid)

        self.faces.append(FaceRec(anchor=chain[0], degree=D, kind=kind))
        return fid

    def _chain_edge_types(self, kind, new_cnt, back, fwd):
        if self.cyc.tag != "m4n4":
            return [0] * new_cnt
        if kind == KIND_M:
            return [TYPE_A] * new_cnt
        if kind == KIND_N:
            return [TYPE_B] * new_cnt
        # square: sides alternate a,b; continue from the glued edge before
        # the chain (squares are never seed faces, so one always exists)
        pred = fwd[-1] if fwd else back[0]
        t = 1 - self.edge_type[pred // 2]
        out = []
        for _ in range(new_cnt):
            out.append(t)
            t = 1 - t
        return out

    def _new_vertex_phase(self, kind, cyc_idx, t_in, t_out):
        if self.cyc.tag == "pq":
            return 0
        if self.cyc.tag == "sq2n":
            # slot 0 of the new vertex holds this face; slot color is
            # (phase + slot) mod 2 with 0 = black
            return kind
        return _M4N4_PHASE[(t_in, t_out)]

    # -- growth driver ------------------------------------------------------

    def saturate(self, v: int):
        while not self._saturated(v):
            self.create_face(v)

    def grow(self, rounds: int):
        for _ in range(rounds):
            for v in range(self.num_vertices):
                self.saturate(v)

    # -- black closure ------------------------------------------------------

    def face_on_right(self, d: int):
        """Existing face id clockwise of dart d at its origin, else None."""
        v = self.origin[d]
        i = self.fan_darts[v].index(d)
        if i >= 1:
            return self.fan_faces[v][i - 1]
        if self._saturated(v):
            return self.fan_faces[v][-1]
        return None

    def _uncreated_head(self, x: int) -> int:
        """Walk the boundary of the uncreated face right of dart x to the
        vertex where the face can be created as a back slot."""
        for _ in range(2 * len(self.origin) + 2):
            t = self.twin[x]
            u = self.origin[t]
            fu = self.fan_darts[u]
            if t != fu[-1]:
                raise GrowthError("uncreated-face walk left the open border")
            if self._closing(u):
                x = fu[0]
            else:
                return u
        raise GrowthError("uncreated-face walk did not terminate")

    def close_black_faces(self):
        """Create the missing black face beside every edge that has none.

        After this pass every edge of the patch borders a complete black
        face, which is what makes the site constraint bind on all edges.
        Only meaningful for families with black faces (m4n4, sq2n).
        """
        if self.cyc.tag == "pq":
            return
        L = self.cyc.valence
        e = 0
        while e < self.num_edges:
            d, d2 = 2 * e, 2 * e + 1
            covered = False
            for x in (d, d2):
                f = self.face_on_right(x)
                if f is not None and self._is_black(self.faces[f].kind):
                    covered = True
            if not covered:
                for x in (d, d2):
                    if self.face_on_right(x) is not None:
                        continue
                    v = self.origin[x]
                    slot = (self.phase[v] - 1) % L
                    if not self._is_black(self.cyc.kinds[slot]):
                        continue
                    self.create_face(self._uncreated_head(x))
                    f = self.face_on_right(x)
                    if f is None or not self._is_black(self.faces[f].kind):
                        raise GrowthError(f"closure missed edge {e}")
                    covered = True
                    break
                if not covered:
                    raise GrowthError(f"edge {e} has no black side")
            e += 1

    def _is_black(self, kind: int) -> bool:
        if self.cyc.tag == "m4n4":
            return kind == KIND_SQUARE
        if self.cyc.tag == "sq2n":
            return kind == KIND_BLACK
        return False
