"""Parameter records, scenario configuration and trial results."""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .diagnostics import ConfigError, Diagnostic, ModelError

FloatArray = NDArray[np.float64]

# Tolerance for "duration / Ts is an integer"
STEP_TOLERANCE = 1e-9


class Scenario(Enum):
    """The three control arrangements that can be simulated."""

    FEEDBACK_ONLY = 1
    FEEDBACK_PLUS_PILC = 2
    FULL_CONSTRAINED = 3

    @property
    def label(self) -> str:
        return {
            Scenario.FEEDBACK_ONLY: "phase-lead feedback",
            Scenario.FEEDBACK_PLUS_PILC: "feedback + P-ILC",
            Scenario.FULL_CONSTRAINED: "feedback + P-ILC + D-ILC velocity constraint",
        }[self]

    @property
    def uses_ilc(self) -> bool:
        return self is not Scenario.FEEDBACK_ONLY


class ReferenceProfile(Enum):
    """Time profile of the along-line reference displacement."""

    RAMP = "ramp"  # constant velocity
    SMOOTHSTEP = "smoothstep"  # 3s^2 - 2s^3


class IlcInjection(Enum):
    """Where the learned feedforward enters the loop."""

    REFERENCE = "reference"  # added to the feedback controller input
    SERIAL = "serial"  # added to the stimulation command


class QFilterMode(Enum):
    """How the ILC robustness filter is applied to the trial signal."""

    CAUSAL = "causal"
    ZERO_PHASE = "zero_phase"
    OFF = "off"


def _require_positive(owner: str, **values: float) -> None:
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise ModelError(f"{owner}.{name} must be positive, got {value}")


@dataclass(frozen=True)
class ArmParams:
    """Anthropometric parameters of the forearm / upper-arm model."""

    m_f: float = 0.84
    l_f1: float = 0.203
    l_f2: float = 0.203
    l_u1: float = 0.154
    l_u2: float = 0.154
    inertia_f: float = 0.12
    inertia_e: float = 0.15
    gamma: float = 1.0472
    r2_malor: float = 0.3
    r1_milor: float = 0.1
    phi: float = 0.6109
    d1: float = 0.2

    def __post_init__(self) -> None:
        _require_positive(
            "ArmParams",
            m_f=self.m_f,
            l_f1=self.l_f1,
            l_f2=self.l_f2,
            l_u1=self.l_u1,
            l_u2=self.l_u2,
        )
        if not 0.0 < self.gamma < math.pi:
            raise ModelError(f"ArmParams.gamma must lie in (0, pi), got {self.gamma}")

    @property
    def upper_arm_length(self) -> float:
        return self.l_u1 + self.l_u2

    @property
    def forearm_length(self) -> float:
        return self.l_f1 + self.l_f2


@dataclass(frozen=True)
class MuscleParams:
    """Hammerstein muscle parameters.

    ``a1``-``a3`` shape the isometric recruitment curve, ``w_n`` sets the
    critically damped activation dynamics, ``epsilon`` the width of the
    force-length curve. ``moment_arm`` converts elbow rotation into a change
    of normalized fibre length.
    """

    a1: float = 1.0
    a2: float = 2.0
    a3: float = 1.0
    w_n: float = math.sqrt(7.129)
    epsilon: float = 0.5
    theta_dot_max: float = math.pi
    l_max: float = 0.406
    moment_arm: float = 0.04

    def __post_init__(self) -> None:
        _require_positive(
            "MuscleParams",
            a1=self.a1,
            a2=self.a2,
            a3=self.a3,
            w_n=self.w_n,
            epsilon=self.epsilon,
            theta_dot_max=self.theta_dot_max,
            l_max=self.l_max,
        )


@dataclass(frozen=True)
class PlantCoefficients:
    """Composite arm + end-effector coefficients of 1/(c2 s^2 + c1 s)."""

    inertial_sum: float = 0.5571
    damping: float = 5.78

    def __post_init__(self) -> None:
        _require_positive(
            "PlantCoefficients", inertial_sum=self.inertial_sum, damping=self.damping
        )


@dataclass(frozen=True)
class PhaseLeadConfig:
    """Gains of the phase-lead compensator Kp (tau s + 1) / (omega tau s + 1)."""

    kp: float = 10.0
    kd: float = 2.0
    omega_lead: float = 0.05

    def __post_init__(self) -> None:
        _require_positive("PhaseLeadConfig", kp=self.kp)
        if not (math.isfinite(self.kd) and self.kd >= 0):
            raise ModelError(f"PhaseLeadConfig.kd must be >= 0, got {self.kd}")
        if not 0.0 < self.omega_lead < 1.0:
            raise ModelError(
                f"PhaseLeadConfig.omega_lead must lie in (0, 1), got {self.omega_lead}"
            )

    @property
    def tau(self) -> float:
        return self.kd / self.kp


@dataclass(frozen=True)
class FesConfig:
    """Stimulator settings. Amplitude and frequency are fixed metadata."""

    amplitude_ma: float = 5.0
    frequency_hz: float = 50.0
    pw_min: float = 0.0
    pw_max: float = 500.0
    full_scale: float = 1.0

    def __post_init__(self) -> None:
        _require_positive(
            "FesConfig",
            amplitude_ma=self.amplitude_ma,
            frequency_hz=self.frequency_hz,
            full_scale=self.full_scale,
        )
        if not self.pw_min < self.pw_max:
            raise ModelError(
                f"FesConfig.pw_min ({self.pw_min}) must be below pw_max ({self.pw_max})"
            )


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of a multi-iteration experiment.

    ``iterations`` left as None picks the scenario default (16, or 13 for the
    constrained scenario). ``r_dot_max`` and ``v0`` override the values
    identified from a feedback-only trial.
    """

    scenario: Scenario = Scenario.FEEDBACK_ONLY
    iterations: int | None = None
    ts: float = 0.05
    duration: float = 10.0
    start: tuple[float, float] = (0.0, 0.0)
    end: tuple[float, float] = (0.2, 0.2)
    profile: ReferenceProfile = ReferenceProfile.RAMP
    learning_gain: float = 0.1
    q_cutoff_hz: float = 0.10
    q_mode: QFilterMode = QFilterMode.ZERO_PHASE
    learning_lead: float = 0.1
    injection: IlcInjection = IlcInjection.REFERENCE
    psi: float = 0.01
    r_dot_max: float | None = None
    r_dot_min: float = 0.0
    v0: float | None = None
    constraint_margin: float = 0.9
    strict_bound: bool = False
    paper_faithful: bool = False
    arm: ArmParams = field(default_factory=ArmParams)
    muscle: MuscleParams = field(default_factory=MuscleParams)
    plant: PlantCoefficients = field(default_factory=PlantCoefficients)
    lead: PhaseLeadConfig = field(default_factory=PhaseLeadConfig)
    fes: FesConfig = field(default_factory=FesConfig)

    def __post_init__(self) -> None:
        if self.iterations is not None and self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not (self.ts > 0 and self.duration > 0):
            raise ConfigError("ts and duration must be positive")
        steps = self.duration / self.ts
        if abs(steps - round(steps)) > STEP_TOLERANCE:
            raise ConfigError(
                f"duration ({self.duration} s) is not a whole number of "
                f"samples of {self.ts} s"
            )
        if not self.learning_gain > 0:
            raise ConfigError(
                f"learning_gain must be positive, got {self.learning_gain}"
            )
        if self.paper_faithful and not 0.1 <= self.learning_gain <= 1.0:
            raise ConfigError(
                f"learning_gain {self.learning_gain} outside [0.1, 1] "
                "in paper-faithful mode"
            )
        if not self.q_cutoff_hz > 0:
            raise ConfigError(f"q_cutoff_hz must be positive, got {self.q_cutoff_hz}")
        if not (math.isfinite(self.learning_lead) and self.learning_lead >= 0):
            raise ConfigError(f"learning_lead must be >= 0, got {self.learning_lead}")
        if not self.psi >= 0:
            raise ConfigError(f"psi must be >= 0, got {self.psi}")
        if not self.r_dot_min >= 0:
            raise ConfigError(f"r_dot_min must be >= 0, got {self.r_dot_min}")
        if self.r_dot_max is not None and not self.r_dot_max > self.r_dot_min:
            raise ConfigError(
                f"r_dot_max ({self.r_dot_max}) must exceed r_dot_min ({self.r_dot_min})"
            )
        if not 0.0 < self.constraint_margin <= 1.0:
            raise ConfigError(
                f"constraint_margin must lie in (0, 1], got {self.constraint_margin}"
            )

    @property
    def trial_count(self) -> int:
        if self.iterations is not None:
            return self.iterations
        return 13 if self.scenario is Scenario.FULL_CONSTRAINED else 16

    @property
    def sample_count(self) -> int:
        return int(round(self.duration / self.ts)) + 1

    @property
    def q_cutoff_rad(self) -> float:
        return 2.0 * math.pi * self.q_cutoff_hz

    @property
    def lead_samples(self) -> int:
        """Learning lead rounded to whole samples."""
        return int(round(self.learning_lead / self.ts))


@dataclass(eq=False)
class TrialRecord:
    """Per-sample signals and per-trial metrics of one iteration."""

    iteration: int
    t: FloatArray
    r_d: FloatArray
    r: FloatArray
    e: FloatArray
    theta_f: FloatArray
    u_fb: FloatArray
    u_ff: FloatArray
    u_applied: FloatArray
    r_dot: FloatArray
    muscle_torque: FloatArray
    pulse_width: FloatArray
    rmse: float
    nrmse: float
    pd_energy: float
    constrained_pd_energy: float
    max_velocity: float
    constraint_bound: float | None = None

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass
class RunReport:
    """Result of a full scenario run."""

    config: ScenarioConfig
    trials: list[TrialRecord] = field(default_factory=list)
    r_dot_max: float | None = None
    v0: float | None = None
    initial_pd_energy: float | None = None
    plateau_iteration: int | None = None
    settle_iteration: int | None = None
    monotone: bool = True
    velocity_bound_held: bool | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def rmse_series(self) -> list[float]:
        return [trial.rmse for trial in self.trials]

    @property
    def final(self) -> TrialRecord:
        return self.trials[-1]
