"""Contour-synchronized predictive control toolkit for a 2-DoF planar arm.

Library layout:

- ``dynamics``: rigid-body model, kinematics, RK4 plant integration
- ``discretization``: Taylor discrete model and stacked horizon prediction
- ``contour``: contour-error estimation and the coupled reference
- ``terminal``: invariant-ellipsoid ingredients (P, H) with certificates
- ``controllers``: computed-torque, one-step predictive, and dual-mode laws
- ``sim``: closed-loop harness, ground-truth contour metrics, comparisons
- ``config``: INI experiment files and built-in presets
- ``plots``: figure rendering for the command-line report path
- ``cli``: ``cesmpc`` command-line entry point
"""
from .config import (
    ConfigError,
    PRESET_NAMES,
    load_config,
    parse_config,
    preset,
    serialize_config,
)
from .contour import (
    ContourTransform,
    CorrectedReference,
    CouplingConfig,
    CouplingError,
    ReferencePoint,
    ZeroTangentError,
    contour_transform,
    contour_transform_or_identity,
    corrected_reference,
    coupling_error,
    estimate_contour_error,
    sync_error,
)
from .controllers import (
    ControllerOutput,
    CtcGains,
    MpcWeights,
    SingularNormalMatrixError,
    TorqueLimits,
    ces_mpc_step,
    constrained_horizon_solution,
    ctc_step,
    local_law_to_torque,
    mpc_baseline_step,
    saturate,
    simulate_linearized_dual_mode,
    unconstrained_horizon_solution,
)
from .discretization import (
    DiscreteModel,
    PredictionModel,
    build_prediction,
    discretize,
    step_model,
    taylor_order_study,
)
from .dynamics import (
    DivergenceError,
    JointState,
    JointTorque,
    ManipulatorParams,
    SingularMassMatrixError,
    TaskPoint,
    WorkspaceError,
    coriolis_matrix,
    forward_dynamics,
    forward_kinematics,
    gravity_vector,
    integrate_plant,
    inverse_kinematics,
    jacobian,
    mass_matrix,
)
from .sim import (
    CONTROLLER_NAMES,
    ComparisonReport,
    InvalidConfigError,
    Metrics,
    SimConfig,
    SimLog,
    TrajectorySpec,
    compare_controllers,
    compute_metrics,
    contour_error_series,
    generate_reference,
    run_closed_loop,
    task_reference,
    terminal_ingredients_for,
    true_contour_error,
    validate_path,
)
from .terminal import (
    LmiProblem,
    NonSymmetricError,
    TerminalInfeasibleError,
    TerminalIngredients,
    certify_terminal,
    contraction_certificate,
    double_integrator_model,
    jacobi_eigh,
    lmi_certificate,
    solve_terminal_lmi,
    symmetric_eigenvalues,
    terminal_membership,
)

__version__ = "0.1.0"
