"""Combinatorial maps (rotation systems).

A map is a set of darts (half-edges) with two permutations: `next_around_vertex`
rotates a dart counterclockwise around its origin vertex, `twin` swaps the two
darts of an edge.  Vertices are orbits of the rotation, edges are orbits of the
twin involution, faces are orbits of d -> next_around_vertex[twin[d]].  All ids
are assigned by smallest dart in the orbit, so numbering is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MapError(ValueError):
    pass


def _orbits(perm: np.ndarray) -> list[list[int]]:
    """Orbits of a permutation, ordered by smallest element, each starting there."""
    n = len(perm)
    seen = np.zeros(n, dtype=bool)
    out = []
    for d0 in range(n):
        if seen[d0]:
            continue
        orb = [d0]
        seen[d0] = True
        d = int(perm[d0])
        while d != d0:
            orb.append(d)
            seen[d] = True
            d = int(perm[d])
        out.append(orb)
    return out


@dataclass(frozen=True)
class CombinatorialMap:
    next_around_vertex: np.ndarray
    twin: np.ndarray
    vertex_of: np.ndarray = field(repr=False)
    edge_of: np.ndarray = field(repr=False)
    face_of: np.ndarray = field(repr=False)
    vertices: list[list[int]] = field(repr=False)
    edges: list[list[int]] = field(repr=False)
    faces: list[list[int]] = field(repr=False)

    @property
    def num_darts(self) -> int:
        return len(self.twin)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def edge_endpoints(self, e: int) -> tuple[int, int]:
        d = self.edges[e][0]
        return int(self.vertex_of[d]), int(self.vertex_of[self.twin[d]])

    def face_vertices(self, f: int) -> list[int]:
        """Vertices around a face, in face-orbit order."""
        return [int(self.vertex_of[d]) for d in self.faces[f]]

    def vertex_degree(self, v: int) -> int:
        return len(self.vertices[v])

    def face_degree(self, f: int) -> int:
        return len(self.faces[f])

    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces


def make_map(next_around_vertex, twin, isolated: int = 0) -> CombinatorialMap:
    """Build a map from raw permutations, validating and deriving all orbits.

    `isolated` appends that many dartless vertices after the orbit-derived
    ones (needed for the degenerate single-vertex patch).
    """
    sigma = np.asarray(next_around_vertex, dtype=np.int64)
    alpha = np.asarray(twin, dtype=np.int64)
    n = len(sigma)
    if len(alpha) != n:
        raise MapError("permutation length mismatch")
    if n == 0 and isolated == 0:
        raise MapError("empty map")
    for name, p in (("next_around_vertex", sigma), ("twin", alpha)):
        if sorted(p.tolist()) != list(range(n)):
            raise MapError(f"{name} is not a permutation of 0..{n - 1}")
    if np.any(alpha == np.arange(n)) or np.any(alpha[alpha] != np.arange(n)):
        raise MapError("twin must be a fixed-point-free involution")

    vert_orbits = _orbits(sigma) + [[] for _ in range(isolated)]
    face_perm = sigma[alpha] if n else sigma
    face_orbits = _orbits(face_perm)
    edge_orbits = _orbits(alpha)

    vertex_of = np.empty(n, dtype=np.int64)
    for i, orb in enumerate(vert_orbits):
        vertex_of[orb] = i
    edge_of = np.empty(n, dtype=np.int64)
    for i, orb in enumerate(edge_orbits):
        edge_of[orb] = i
    face_of = np.empty(n, dtype=np.int64)
    for i, orb in enumerate(face_orbits):
        face_of[orb] = i

    return CombinatorialMap(
        next_around_vertex=sigma,
        twin=alpha,
        vertex_of=vertex_of,
        edge_of=edge_of,
        face_of=face_of,
        vertices=vert_orbits,
        edges=edge_orbits,
        faces=face_orbits,
    )


def dual_map(m: CombinatorialMap) -> CombinatorialMap:
    """Dual map: faces and vertices exchange roles, darts and edges are shared.

    The dual rotation is the face-orbit successor sigma o twin; applying
    dual_map twice gives back the original permutations exactly.
    """
    return make_map(m.next_around_vertex[m.twin], m.twin)


def is_connected(m: CombinatorialMap) -> bool:
    n = m.num_darts
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        d = stack.pop()
        for nd in (int(m.next_around_vertex[d]), int(m.twin[d])):
            if not seen[nd]:
                seen[nd] = True
                stack.append(nd)
    return bool(seen.all())
