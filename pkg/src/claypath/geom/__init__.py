from .mesh import Mesh, MeshError, load_mesh
from .slicing import Contour, Layer, SliceError, slice_mesh
from .offset import offset_contour
from .paths import infill_region, overhang_flags, spiralize

__all__ = [
    "Mesh",
    "MeshError",
    "load_mesh",
    "Contour",
    "Layer",
    "SliceError",
    "slice_mesh",
    "offset_contour",
    "spiralize",
    "infill_region",
    "overhang_flags",
]
