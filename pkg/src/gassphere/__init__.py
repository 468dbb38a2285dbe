"""Viscous gaseous stars with a vacuum free boundary.

Equilibrium profiles, a Lagrangian finite-difference scheme on the fixed
reference grid, explicit and implicit-explicit time stepping, weighted-norm
diagnostics with decay fits, the tangent (linearized) flow, and a run
harness with config files, sweeps and CSV/JSON artifacts.
"""

from .diagnostics import (
    DecayExponentTable,
    DecayFitResult,
    DiagnosticRecord,
    EulerianSnapshot,
    density_deviation,
    fit_decay,
    physical_energy,
    record_fields,
    theoretical_exponents,
    to_eulerian,
    weighted_norms,
)
from .errors import (
    BlowUpError,
    ConfigError,
    DomainError,
    GasSphereError,
    InsufficientResolutionError,
    InvalidDensityError,
    InvalidPerturbationError,
    MassMismatchError,
    MeshTanglingError,
    SolverFailureError,
    UnsupportedIndexError,
)
from .harness import (
    RunConfig,
    SweepResult,
    config_from_dict,
    describe_initial_data,
    fit_report,
    load_config,
    run_experiment,
    run_linearize,
    sweep,
)
from .initial_data import (
    FAMILIES,
    CompatibilityReport,
    PerturbationSpec,
    build_perturbation,
    check_compatibility,
    mass_match_map,
)
from .integrator import RunResult, StepPolicy, run, step
from .linearized import (
    LinearEnergyReport,
    LinearizationReport,
    LinearRunResult,
    LinearState,
    compare_with_nonlinear,
    linear_energy,
    linear_rhs,
    run_linear,
    tangent_state,
)
from .polytrope import (
    HolderReport,
    PolytropeProfile,
    profile_eval,
    solve_lane_emden,
    verify_physical_vacuum,
)
from .scheme import (
    BackgroundGrid,
    LagrangianState,
    apply_closure,
    boundary_stress,
    close_boundary,
    discrete_G,
    discrete_energy_functional,
    equilibrium_state,
    explicit_accel,
    rhs,
    sample_background,
    viscous_tridiagonal,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "GasSphereError",
    "ConfigError",
    "SolverFailureError",
    "MeshTanglingError",
    "BlowUpError",
    "UnsupportedIndexError",
    "DomainError",
    "InsufficientResolutionError",
    "MassMismatchError",
    "InvalidDensityError",
    "InvalidPerturbationError",
    # equilibrium
    "PolytropeProfile",
    "HolderReport",
    "solve_lane_emden",
    "profile_eval",
    "verify_physical_vacuum",
    # grid and scheme
    "BackgroundGrid",
    "LagrangianState",
    "sample_background",
    "equilibrium_state",
    "rhs",
    "explicit_accel",
    "viscous_tridiagonal",
    "close_boundary",
    "apply_closure",
    "boundary_stress",
    "discrete_energy_functional",
    "discrete_G",
    # initial data
    "PerturbationSpec",
    "CompatibilityReport",
    "FAMILIES",
    "build_perturbation",
    "mass_match_map",
    "check_compatibility",
    # time stepping
    "StepPolicy",
    "RunResult",
    "step",
    "run",
    # diagnostics
    "DiagnosticRecord",
    "DecayExponentTable",
    "DecayFitResult",
    "EulerianSnapshot",
    "weighted_norms",
    "physical_energy",
    "to_eulerian",
    "density_deviation",
    "theoretical_exponents",
    "fit_decay",
    "record_fields",
    # tangent flow
    "LinearState",
    "LinearEnergyReport",
    "LinearRunResult",
    "LinearizationReport",
    "tangent_state",
    "linear_rhs",
    "linear_energy",
    "run_linear",
    "compare_with_nonlinear",
    # harness
    "RunConfig",
    "SweepResult",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "run_linearize",
    "sweep",
    "fit_report",
    "describe_initial_data",
]
