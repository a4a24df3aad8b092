"""Interface-preserving moving meshes on incremental Delaunay triangulations."""

from .dmesh import Triangulation, VertexKind, build, validate_delaunay
from .iface import Interface, check_preservation, move_interface, seed_interface
from .mmesh import MeshState, ProjectionKind

__all__ = [
    "Interface",
    "MeshState",
    "ProjectionKind",
    "Triangulation",
    "VertexKind",
    "build",
    "check_preservation",
    "move_interface",
    "seed_interface",
    "validate_delaunay",
]
