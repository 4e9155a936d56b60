"""Statistical mechanics on hyperbolic and Euclidean lattice patches."""

from .maps import CombinatorialMap, MapError, dual_map, is_connected, make_map
from .tiling import (BondGraph, ConstraintTables, LatticeBall, LatticeFamily,
                     TilingError, ball_hash, build_m4n4_ball, build_pq_ball,
                     build_square_tiling_ball, build_torus_4612, cantellate,
                     export_ball, flag_graph, hexagonal_torus, import_ball,
                     label_white_faces)

__all__ = [
    "CombinatorialMap", "MapError", "dual_map", "is_connected", "make_map",
    "BondGraph", "ConstraintTables", "LatticeBall", "LatticeFamily",
    "TilingError", "ball_hash", "build_m4n4_ball", "build_pq_ball",
    "build_square_tiling_ball", "build_torus_4612", "cantellate",
    "export_ball", "flag_graph", "hexagonal_torus", "import_ball",
    "label_white_faces",
]
