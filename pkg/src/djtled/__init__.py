"""Total Lagrangian explicit dynamics for hyperelastic soft tissue.

Two interchangeable force engines are provided: ``djtled`` evaluates nodal
forces directly from the element Jacobian operator with precomputed constant
tensors, ``tled`` takes the conventional deformation-gradient / stress route.
"""

__version__ = "0.1.0"

from .assembly import ENGINES, ForceAssembler
from .element import ElementKind
from .errors import ConfigError, DivergenceError, DJTLEDError, InversionError, MeshError, StabilityError
from .materials import MooneyRivlin, NeoHookean, Orthotropic, TransverselyIsotropic, benchmark_material
from .mesh import (BoundaryConditions, Mesh, PrescribedDisplacement, export_field, fix_nodes, generate_box,
                   load_mesh, nodes_on_plane, read_field, read_mesh, render_mesh)
from .metrics import nre, nre_histogram, rmse
from .precompute import critical_dt
from .solver import RunResult, Simulation, relaxation_damping, run

__all__ = [
    "ENGINES", "ForceAssembler", "ElementKind", "ConfigError", "DivergenceError", "DJTLEDError",
    "InversionError", "MeshError", "StabilityError", "MooneyRivlin", "NeoHookean", "Orthotropic",
    "TransverselyIsotropic", "benchmark_material", "BoundaryConditions", "Mesh", "PrescribedDisplacement",
    "export_field", "fix_nodes", "generate_box", "load_mesh", "nodes_on_plane", "read_field", "read_mesh",
    "render_mesh", "nre", "nre_histogram", "rmse", "critical_dt", "RunResult", "Simulation",
    "relaxation_damping", "run",
]
