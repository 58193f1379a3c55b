"""Numerical toolkit for translating solitons of mean curvature flow in slabs."""

from tslab.mesh import TriMesh, MeshError, read_obj, write_obj, euler_characteristic

__version__ = "0.1.0"

__all__ = [
    "TriMesh",
    "MeshError",
    "read_obj",
    "write_obj",
    "euler_characteristic",
    "__version__",
]
