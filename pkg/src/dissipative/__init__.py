"""Structure-preserving Galerkin / discontinuous Galerkin discretization of
dissipative evolution problems in weighted variational form."""

from .core import EnergyModel, FieldSpec, State, StructureReport, dissipation, energy, verify_structure
from .diagnostics import (CheckReport, EnergyLedger, LedgerRow, check_conservation, check_dissipation_inequality,
                          fit_exponential_decay, read_csv, write_csv)
from .errors import (AdmissibilityError, ArgumentError, ConfigError, DissipativeError, NewtonDivergence,
                     SingularMatrixError)
from .fem1d import (FESpace, Kind, Mesh1D, ProductSpace, Quadrature, assemble_residual, build_uniform_mesh, eval_fe,
                    gauss, integrate, interpolate, l2_project)
from .timestep import SlabSolution, TimeGrid, dg_step, fd_jacobian, newton_solve, run_transient

__version__ = "0.1.0"
