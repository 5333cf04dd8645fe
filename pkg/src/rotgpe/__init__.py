"""Conservative Crank-Nicolson finite elements for the rotating Gross-Pitaevskii equation.

Subpackages cover the pipeline from mesh to experiment driver:

- mesh: structured rectangle meshes
- elements: reference bases (bilinear and rotated-bilinear), DOF maps, quadrature
- assembly: sparse forms (mass, stiffness, potential, rotation, boundary pairing)
- scheme: the implicit midpoint time stepper with averaged-density nonlinearity
- observables: mass, discrete energy, error norms, macro-cell postprocessing
- groundstate: normalized gradient flow
- harness: experiment drivers, config parsing, CSV/snapshot file formats
"""

from rotgpe.mesh import RectDomain, StructuredMesh, build_mesh, refine_uniform
from rotgpe.elements import ElementKind, FeSpace, gauss_rule
from rotgpe.assembly import PotentialSpec, FormSet, build_forms
from rotgpe.scheme import Field, SchemeConfig, StepReport, cn_step, evolve
from rotgpe.scheme import NonConvergenceError, SingularSystemError

__all__ = [
    "RectDomain", "StructuredMesh", "build_mesh", "refine_uniform",
    "ElementKind", "FeSpace", "gauss_rule",
    "PotentialSpec", "FormSet", "build_forms",
    "Field", "SchemeConfig", "StepReport", "cn_step", "evolve",
    "NonConvergenceError", "SingularSystemError",
]

__version__ = "0.1.0"
