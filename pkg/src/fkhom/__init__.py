"""Homogenized principal-eigenvalue shape optimization on grids."""

from .ball import (
    J01,
    LAMBDA_BALL,
    ball_boundary_slope,
    ball_interior_max_slope,
    ellipsoid_ground_state,
    lambda1_ellipsoid,
)
from .cell import (
    CorrectorSet,
    HomogenizedTensor,
    corrected_trial,
    directional_energy,
    homogenize,
    solve_correctors,
)
from .eigsolve import (
    EigenResult,
    diagnostics,
    eigen,
    gap_stability_check,
    rayleigh_quotient,
)
from .errors import (
    ConfigError,
    DegenerateGapWarning,
    EllipticityError,
    EmptyMaskError,
    FkhomError,
    InternalInconsistencyError,
    MonotonicityError,
    SolverError,
    WindowError,
)
from .fields import (
    CoeffField,
    EigOptions,
    OptOptions,
    ProblemConfig,
    SweepOptions,
    build_field,
    identity_field,
)
from .harness import (
    CSV_HEADER,
    SweepRow,
    emit_report,
    faber_krahn_check,
    parse_sweep_csv,
    rate_sweep,
    scaling_sweep,
)
from .masks import (
    DomainMask,
    Ellipsoid,
    GridWindow,
    asymmetry,
    density_report,
    dist_omega,
    embed,
    hausdorff_boundary,
    rasterize_ellipsoid,
    symmetric_difference_volume,
)
from .optimize import (
    OptResult,
    PenaltyField,
    build_penalty,
    discrete_J,
    ellipsoid_minimizer,
    energy_deficit,
    hard_constraint_pipeline,
    minimize_J,
    penalty_from_json,
    penalty_to_json,
    select_mu,
    volume_map,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
