"""Printable mesh generation: finger/hand solids, print checks, STL I/O."""

from .build import (
    FeatureCheck,
    JOINT_STANDOFF_MM,
    PrintReport,
    bone_shaft_mesh,
    build_finger_mesh,
    build_hand_mesh,
    check_print_constraint,
)
from .mesh import GeometryError, TriMesh, require_printable, weld
from .stl import export_stl, import_stl, stl_bytes

__all__ = [
    "FeatureCheck",
    "GeometryError",
    "JOINT_STANDOFF_MM",
    "PrintReport",
    "TriMesh",
    "bone_shaft_mesh",
    "build_finger_mesh",
    "build_hand_mesh",
    "check_print_constraint",
    "export_stl",
    "import_stl",
    "require_printable",
    "stl_bytes",
    "weld",
]
