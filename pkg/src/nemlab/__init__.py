"""Desk-scale numerical laboratory for nematic liquid crystal flow.

Semi-discrete simulation of director-coupled incompressible flow with a
general Oseen-Frank elastic energy and static magnetic coupling,
structural diagnostics (energy equality, director norm conservation,
coercivity), a relative-energy certificate against smooth test
trajectories, and approximate optimal control over static fields.
"""

from .certificate import (
    CertificateReport,
    TestSample,
    TestTrajectory,
    TrajectoryError,
    certificate,
    correction,
    equation_residual,
    initial_distance,
    regularity_weight,
    rel_dissipation,
    rel_energy,
)
from .config import ConfigError, RunConfig, apply_overrides, build_run, load_config
from .control import (
    ControlError,
    ControlProblem,
    ControlResult,
    build_control_field,
    cost_J,
    optimize,
    project_control,
)
from .energy import (
    EnergyBreakdown,
    magnetic_density,
    oseen_frank_density,
    total_free_energy,
    variational_derivative,
)
from .fields import (
    DirectorSpace,
    ExtensionError,
    Grid,
    ProjectionError,
    SnapshotError,
    director_project,
    extend_dirichlet,
    leray_project,
    make_grid,
    random_band_limited,
    read_snapshot,
    twist_field,
    unit_normalize,
    write_snapshot,
)
from .material import MaterialError, MaterialParams, build_params, default_params
from .scheme import (
    BlowUpError,
    EnergyReport,
    FieldState,
    SchemeConfig,
    SimulationTrace,
    energy_report,
    integrate,
    leslie_stress,
    prepare_initial,
    suggest_dt,
)

__version__ = "0.1.0"
