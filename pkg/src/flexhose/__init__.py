"""Dynamics, flat trajectory planning, and tracking control for a flexible
hose carried by multiple quadrotors (lumped-mass chain on R^3 x (S^2)^n x
SO(3)^n_quad)."""

__version__ = "0.1.0"

from .control import (
    FeedforwardGains,
    GainSchedule,
    LqrWeights,
    apply_feedback,
    feedforward_baseline,
    lqr_feedback,
    riccati_backward,
    weights_from_config,
)
from .dynamics import (
    Accelerations,
    EnergyBreakdown,
    StateDerivative,
    accelerations,
    assemble,
    energy,
    link_tensions,
    mass_entries,
    rhs,
    tethered_rhs,
)
from .errors import FlexhoseError, NumericalError, ValidationError
from .flatness import (
    DesiredPoint,
    FlatOutputs,
    expand,
    required_jet_order,
    solve_static_shape,
    tethered_expand,
    thrust_to_attitude,
)
from .geometry import (
    hat,
    project_s2,
    project_so3,
    s2_config_error,
    s2_error_vector,
    so3_config_error,
    so3_error_vector,
    vee,
)
from .jets import (
    ConstantChannel,
    PolynomialChannel,
    ScalarJet,
    SinusoidChannel,
    Vec3Jet,
    jet_add,
    jet_cross,
    jet_dot,
    jet_mul,
    jet_norm,
    jet_normalize,
    jet_scale,
    sample_primitive,
)
from .linearization import (
    ErrorState,
    LinearizedSystem,
    build_A,
    build_B,
    build_C,
    error_state,
    fd_validate,
    linearize_points,
    propagate_error_flow,
    retract,
)
from .model import (
    ControlInput,
    SystemParams,
    SystemState,
    dof_counts,
    net_mass,
    node_positions,
    node_velocities,
    uniform_params,
)
from .sim import InitialError, LogRecord, RunResult, Scenario, benchmark, run, step
