"""
fesilc - Simulate hybrid FES + robot upper-limb rehabilitation control.

Phase-lead feedback, P-type iterative learning control with a Q-filter and a
learning velocity constraint, run trial after trial on a linearized
muscle/arm model. Usable from the command line and as a library.
"""

from .controllers import (
    ConstraintState,
    IlcMemory,
    advance,
    bea_epsilon,
    build_phase_lead,
    build_q_filter,
    dilc_update,
    fes_modulate,
    ilc_update,
    q_filter,
    sat_constrain,
)
from .diagnostics import (
    ConfigError,
    Diagnostic,
    DivergenceError,
    KinematicsError,
    ModelError,
    OutputError,
    SimulationError,
)
from .engine import (
    identify_velocity_bound,
    nrmse,
    prepare_loop,
    rmse,
    run_scenario,
    run_trial,
)
from .kinematics import (
    ArmKinematics,
    TaskTrajectory,
    VelocityProfile,
    differentiate,
    forward_kinematics,
    inverse_kinematics,
    line_trajectory,
    resultant_velocity,
)
from .lti import (
    DiscreteSystem,
    FrequencyPoint,
    StateSpace,
    TransferFunction,
    bandwidth_3db,
    discretize_tustin,
    discretize_zoh,
    feedback_unity,
    frequency_response,
    series,
    simulate,
    to_state_space,
    tustin_coefficients,
)
from .models import (
    ArmParams,
    FesConfig,
    IlcInjection,
    MuscleParams,
    PhaseLeadConfig,
    PlantCoefficients,
    QFilterMode,
    ReferenceProfile,
    RunReport,
    Scenario,
    ScenarioConfig,
    TrialRecord,
)
from .output import emit_outputs
from .plant import (
    build_muscle_linear,
    build_plant,
    compute_b_a3,
    f_ma,
    f_mp,
    h_irc,
    h_irc_inverse,
    verify_linearization,
)

__all__ = [
    "TransferFunction",
    "StateSpace",
    "DiscreteSystem",
    "FrequencyPoint",
    "series",
    "feedback_unity",
    "to_state_space",
    "discretize_zoh",
    "discretize_tustin",
    "tustin_coefficients",
    "simulate",
    "frequency_response",
    "bandwidth_3db",
    "ArmParams",
    "MuscleParams",
    "PlantCoefficients",
    "PhaseLeadConfig",
    "FesConfig",
    "Scenario",
    "ReferenceProfile",
    "IlcInjection",
    "QFilterMode",
    "ScenarioConfig",
    "TrialRecord",
    "RunReport",
    "compute_b_a3",
    "build_plant",
    "build_muscle_linear",
    "h_irc",
    "h_irc_inverse",
    "f_ma",
    "f_mp",
    "verify_linearization",
    "TaskTrajectory",
    "ArmKinematics",
    "VelocityProfile",
    "line_trajectory",
    "inverse_kinematics",
    "forward_kinematics",
    "resultant_velocity",
    "differentiate",
    "IlcMemory",
    "ConstraintState",
    "build_phase_lead",
    "build_q_filter",
    "q_filter",
    "advance",
    "ilc_update",
    "bea_epsilon",
    "dilc_update",
    "sat_constrain",
    "fes_modulate",
    "prepare_loop",
    "run_trial",
    "run_scenario",
    "rmse",
    "nrmse",
    "identify_velocity_bound",
    "emit_outputs",
    "Diagnostic",
    "SimulationError",
    "ModelError",
    "KinematicsError",
    "DivergenceError",
    "ConfigError",
    "OutputError",
]

try:
    from ._version import version as __version__
except ImportError:
    __version__ = "0.0.0+unknown"
