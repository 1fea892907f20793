"""eulerslice: lowest-order mixed finite-element solver for the dry
compressible Euler equations on 1D columns and 2D vertical slices, with four
Helmholtz block preconditioners for the implicit time step."""

from .constants import CONST, PhysicalConstants
from .mesh import StructuredMesh, Space, build_dof_map, build_mesh, eval_basis
from .state import (FLUX_NEW, FLUX_ORIG, FORMULATIONS, MATERIAL_CP,
                    MATERIAL_LORENZ, State)

__all__ = [
    "CONST", "PhysicalConstants", "StructuredMesh", "Space", "build_mesh",
    "build_dof_map", "eval_basis", "State", "FORMULATIONS", "FLUX_NEW",
    "FLUX_ORIG", "MATERIAL_CP", "MATERIAL_LORENZ",
]

__version__ = "0.1.0"
