"""Feedback, iterative learning and velocity-constraint control laws."""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import filtfilt, lfilter, lfilter_zi

from .diagnostics import ModelError
from .kinematics import VelocityProfile
from .lti import TransferFunction, tustin_coefficients
from .models import FesConfig, FloatArray, PhaseLeadConfig, QFilterMode

logger = logging.getLogger(__name__)


def build_phase_lead(cfg: PhaseLeadConfig) -> TransferFunction:
    """Phase-lead compensator (Kd s + Kp) / ((omega Kd / Kp) s + 1)."""
    return TransferFunction(
        (cfg.kd, cfg.kp), (cfg.omega_lead * cfg.kd / cfg.kp, 1.0)
    )


def build_q_filter(cutoff_hz: float) -> TransferFunction:
    """First-order low-pass wc / (s + wc) with wc = 2 pi cutoff_hz."""
    if not cutoff_hz > 0:
        raise ModelError(f"Q-filter cutoff must be positive, got {cutoff_hz}")
    wc = 2.0 * math.pi * cutoff_hz
    return TransferFunction((wc,), (1.0, wc))


@dataclass(eq=False)
class IlcMemory:
    """Trial-to-trial state of the P-type learning controller.

    Attributes:
        feedforward: Learned input U_k, one value per sample
        error: Tracking error e_k of the last trial (m)
        learning_gain: L
        q_cutoff: Q-filter corner in rad/s
        iteration_index: Number of updates applied so far
        q_mode: Filtering direction
        lead_samples: Samples the update looks ahead in the error
        paper_faithful: Restrict L to [0.1, 1]
    """

    feedforward: FloatArray
    error: FloatArray
    learning_gain: float
    q_cutoff: float
    iteration_index: int = 0
    q_mode: QFilterMode = QFilterMode.ZERO_PHASE
    lead_samples: int = 0
    paper_faithful: bool = False

    def __post_init__(self) -> None:
        self.feedforward = np.array(self.feedforward, dtype=float)
        self.error = np.array(self.error, dtype=float)
        if self.feedforward.size != self.error.size:
            raise ModelError(
                f"Feedforward ({self.feedforward.size}) and error "
                f"({self.error.size}) lengths differ"
            )
        if not self.learning_gain > 0:
            raise ModelError(
                f"Learning gain must be positive, got {self.learning_gain}"
            )
        if self.paper_faithful and not 0.1 <= self.learning_gain <= 1.0:
            raise ModelError(
                f"Learning gain {self.learning_gain} outside [0.1, 1] "
                "in paper-faithful mode"
            )
        if not self.q_cutoff > 0:
            raise ModelError(f"Q-filter cutoff must be positive, got {self.q_cutoff}")
        if self.lead_samples < 0:
            raise ModelError(f"lead_samples must be >= 0, got {self.lead_samples}")

    @classmethod
    def zeros(
        cls,
        length: int,
        learning_gain: float,
        q_cutoff: float,
        q_mode: QFilterMode = QFilterMode.ZERO_PHASE,
        lead_samples: int = 0,
        paper_faithful: bool = False,
    ) -> "IlcMemory":
        return cls(
            feedforward=np.zeros(length),
            error=np.zeros(length),
            learning_gain=learning_gain,
            q_cutoff=q_cutoff,
            q_mode=q_mode,
            lead_samples=lead_samples,
            paper_faithful=paper_faithful,
        )


def advance(signal: FloatArray, samples: int) -> FloatArray:
    """Shift a series ``samples`` steps earlier, holding its last value."""
    if samples <= 0 or signal.size == 0:
        return signal
    shifted = np.empty_like(signal)
    keep = max(signal.size - samples, 0)
    shifted[:keep] = signal[samples:]
    shifted[keep:] = signal[-1]
    return shifted


def q_filter(
    signal: FloatArray, Ts: float, cutoff: float, mode: QFilterMode
) -> FloatArray:
    """
    Apply the Tustin-discretized Q-filter to a trial-length series.

    The causal pass starts from the equilibrium of the first sample. The
    zero-phase pass filters forwards and backwards over an odd extension
    of the ends, so neither end is pulled towards zero.
    """
    if mode is QFilterMode.OFF or signal.size == 0:
        return signal
    b, a = tustin_coefficients(build_q_filter(cutoff / (2.0 * math.pi)), Ts)
    if mode is QFilterMode.CAUSAL:
        filtered, _ = lfilter(b, a, signal, zi=lfilter_zi(b, a) * signal[0])
        return filtered
    padlen = min(3 * max(a.size, b.size), signal.size - 1)
    return filtfilt(b, a, signal, padlen=padlen)


def ilc_update(mem: IlcMemory, Ts: float) -> FloatArray:
    """
    Apply U_{k+1} = Q(U_k + L e_k) and store the result in ``mem``.

    With ``lead_samples`` > 0 the error enters advanced by that many
    samples, so the update anticipates the loop delay.

    Args:
        mem: Learning memory; ``feedforward`` and ``iteration_index`` are updated
        Ts: Sample period (s)

    Returns:
        The new feedforward series.
    """
    if mem.feedforward.size != mem.error.size:
        raise ModelError(
            f"Feedforward ({mem.feedforward.size}) and error "
            f"({mem.error.size}) lengths differ"
        )
    raw = mem.feedforward + mem.learning_gain * advance(mem.error, mem.lead_samples)
    updated = q_filter(raw, Ts, mem.q_cutoff, mem.q_mode)
    mem.feedforward = np.ascontiguousarray(updated, dtype=float)
    mem.iteration_index += 1
    logger.debug(
        "ILC update %d: max |U| = %.6f",
        mem.iteration_index,
        float(np.max(np.abs(mem.feedforward))) if mem.feedforward.size else 0.0,
    )
    return mem.feedforward


@dataclass(frozen=True, eq=False)
class ConstraintState:
    """Learned bound on the feedback output and the velocity limits it enforces.

    Attributes:
        constraint: V_k, one level per sample
        psi: Learning rate
        r_dot_max: Upper speed bound (m/s)
        r_dot_min: Lower speed bound (m/s)
        epsilon: Margin from the last bounded-error test, None before any update
        strict_min: Apply the lower bound to every sample, including the
            rest interval at the start of a trial
    """

    constraint: FloatArray
    psi: float
    r_dot_max: float
    r_dot_min: float = 0.0
    epsilon: float | None = None
    strict_min: bool = False

    def __post_init__(self) -> None:
        levels = np.array(self.constraint, dtype=float)
        levels.setflags(write=False)
        object.__setattr__(self, "constraint", levels)
        if not np.all(np.isfinite(levels)):
            raise ModelError("Constraint levels must be finite")
        if not self.psi >= 0:
            raise ModelError(f"psi must be >= 0, got {self.psi}")
        if not self.r_dot_max > self.r_dot_min >= 0:
            raise ModelError(
                f"Velocity bounds must satisfy r_dot_max > r_dot_min >= 0, "
                f"got {self.r_dot_max} and {self.r_dot_min}"
            )

    @classmethod
    def constant(
        cls,
        level: float,
        length: int,
        psi: float,
        r_dot_max: float,
        r_dot_min: float = 0.0,
        strict_min: bool = False,
    ) -> "ConstraintState":
        return cls(
            constraint=np.full(length, float(level)),
            psi=psi,
            r_dot_max=r_dot_max,
            r_dot_min=r_dot_min,
            strict_min=strict_min,
        )

    @property
    def bound(self) -> float:
        """Saturation level B = max(V), never negative."""
        if self.constraint.size == 0:
            return 0.0
        return max(float(np.max(self.constraint)), 0.0)


def bea_epsilon(r_dot: VelocityProfile, cs: ConstraintState) -> float:
    """
    Two-sided margin of a velocity profile against the bounds.

    A value <= 0 means the bound is violated. Unless ``cs.strict_min`` is set,
    the rest interval at the start of the trial (sample 0 and any following
    samples still at or below ``r_dot_min``) is left out of the lower branch.
    """
    speeds = r_dot.r_dot
    if speeds.size == 0:
        raise ModelError("Velocity profile is empty")
    upper = float(np.min(cs.r_dot_max - speeds))
    if cs.strict_min:
        lower_part = speeds
    else:
        moving = np.flatnonzero(speeds[1:] > cs.r_dot_min)
        start = int(moving[0]) + 1 if moving.size else speeds.size
        lower_part = speeds[start:]
    lower = float(np.min(lower_part - cs.r_dot_min)) if lower_part.size else math.inf
    return min(upper, lower)


def dilc_update(cs: ConstraintState, r_dot: VelocityProfile) -> ConstraintState:
    """
    Learn the next constraint levels from the last trial's speed profile.

    While the bounded-error margin is positive every level grows by
    psi (r_dot_max - r_dot); otherwise levels shrink by psi times the amount
    each sample exceeds r_dot_max.
    """
    speeds = r_dot.r_dot
    if speeds.size != cs.constraint.size:
        raise ModelError(
            f"Velocity profile ({speeds.size}) and constraint "
            f"({cs.constraint.size}) lengths differ"
        )
    epsilon = bea_epsilon(r_dot, cs)
    if epsilon > 0:
        levels = cs.constraint + cs.psi * (cs.r_dot_max - speeds)
    else:
        levels = cs.constraint - cs.psi * np.maximum(0.0, speeds - cs.r_dot_max)
        logger.warning(
            "Velocity bound violated (margin %.6f); tightening constraint", epsilon
        )
    updated = replace(cs, constraint=levels, epsilon=epsilon)
    logger.debug("Constraint bound %.6f -> %.6f", cs.bound, updated.bound)
    return updated


def saturate(value: float, bound: float) -> float:
    """Clamp a single sample to [-bound, bound]."""
    return min(max(value, -bound), bound)


def sat_constrain(u_pd: ArrayLike, cs: ConstraintState) -> FloatArray:
    """Clamp the feedback output to +/- max(V)."""
    bound = cs.bound
    return np.clip(np.asarray(u_pd, dtype=float), -bound, bound)


def fes_modulate(u: ArrayLike, cfg: FesConfig) -> FloatArray:
    """Map controller output onto pulse-width commands in microseconds."""
    span = cfg.pw_max - cfg.pw_min
    pulse = cfg.pw_min + span * np.asarray(u, dtype=float) / cfg.full_scale
    return np.clip(pulse, cfg.pw_min, cfg.pw_max)
