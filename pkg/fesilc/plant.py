"""Arm/robot plant and Hammerstein muscle models."""

import logging
import math

import numpy as np
from numpy.typing import ArrayLike

from .diagnostics import ModelError
from .lti import (
    TransferFunction,
    discretize_zoh,
    simulate,
    to_state_space,
)
from .models import ArmParams, FloatArray, MuscleParams, PlantCoefficients

logger = logging.getLogger(__name__)

# Coefficients of the active force-velocity curve
FMA_GAIN = 0.54
FMA_SLOPE = 5.69
FMA_SHIFT = 0.51
FMA_OFFSET = 0.745


def compute_b_a3(arm: ArmParams) -> float:
    """Evaluate the forearm inertia term b_a3.

    The trig factor uses cos(gamma)^4 in the denominator as printed in the
    model description.

    Raises:
        ModelError: If 1 - cos^4(gamma) vanishes.
    """
    denom = 1.0 - math.cos(arm.gamma) ** 4
    if abs(denom) < 1e-12:
        raise ModelError(f"b_a3 undefined for gamma = {arm.gamma}")
    trig = math.sin(arm.gamma) / denom
    return arm.m_f * arm.l_f1**2 + arm.inertia_f + arm.inertia_e * trig**2


def implied_k_m2(arm: ArmParams, coeffs: PlantCoefficients) -> float:
    """End-effector mass gain implied by the composite inertial coefficient."""
    return coeffs.inertial_sum - compute_b_a3(arm)


def build_plant(coeffs: PlantCoefficients) -> TransferFunction:
    """Elbow displacement per unit torque: 1/(c2 s^2 + c1 s)."""
    return TransferFunction((1.0,), (coeffs.inertial_sum, coeffs.damping, 0.0))


def build_plant_velocity(coeffs: PlantCoefficients) -> TransferFunction:
    """Rate form of the plant: 1/(c2 s + c1)."""
    return TransferFunction((1.0,), (coeffs.inertial_sum, coeffs.damping))


def build_muscle_linear(mp: MuscleParams) -> TransferFunction:
    """Critically damped activation dynamics with unit DC gain."""
    wn2 = mp.w_n**2
    return TransferFunction((wn2,), (1.0, 2.0 * mp.w_n, wn2))


def h_irc(u: float, mp: MuscleParams) -> float:
    """Isometric recruitment curve a1 (e^(a2 u) - 1) / (e^(a2 u) + a3)."""
    x = mp.a2 * u
    if x > 0:
        # rewritten in e^-x so large inputs approach a1 without overflow
        decay = math.exp(-x)
        return mp.a1 * (1.0 - decay) / (1.0 + mp.a3 * decay)
    grow = math.exp(x)
    return mp.a1 * (grow - 1.0) / (grow + mp.a3)


def h_irc_inverse(y: float, mp: MuscleParams) -> float:
    """Closed-form inverse of :func:`h_irc`.

    Raises:
        ModelError: If ``y`` lies outside [0, a1).
    """
    if not 0.0 <= y < mp.a1:
        raise ModelError(f"Recruitment level {y} outside invertible range [0, {mp.a1})")
    ratio = y / mp.a1
    return math.log((1.0 + ratio * mp.a3) / (1.0 - ratio)) / mp.a2


def f_ma(theta_dot_norm: float) -> float:
    """Active force-velocity scaling for a normalized elbow velocity."""
    return FMA_GAIN * math.atan(FMA_SLOPE * theta_dot_norm + FMA_SHIFT) + FMA_OFFSET


def f_mp(l_norm: float, epsilon: float) -> float:
    """Gaussian force-length curve peaking at the optimal length."""
    if not epsilon > 0:
        raise ModelError(f"epsilon must be positive, got {epsilon}")
    return math.exp(-(((l_norm - 1.0) / epsilon) ** 2))


def simulate_muscle_chain(
    mp: MuscleParams,
    stimulation: ArrayLike,
    Ts: float,
    coeffs: PlantCoefficients | None = None,
    compensate: bool = True,
) -> tuple[FloatArray, FloatArray]:
    """Drive the nonlinear muscle into the arm plant sample by sample.

    The force-velocity term sees the normalized elbow velocity of the previous
    sample. With ``compensate`` the inverse recruitment curve and the inverse
    force terms are wrapped around the physical ones so only the linear
    activation dynamics remain.

    Args:
        mp: Muscle parameters
        stimulation: Stimulation samples in [0, a1)
        Ts: Sample period in seconds
        coeffs: Plant the muscle torque is applied to
        compensate: Insert the inverse blocks

    Returns:
        Tuple of (muscle torque, output of the linear activation dynamics
        driven directly by ``stimulation``).
    """
    coeffs = coeffs or PlantCoefficients()
    stim = np.atleast_1d(np.asarray(stimulation, dtype=float)).ravel()
    activation = discretize_zoh(to_state_space(build_muscle_linear(mp)), Ts)
    arm = discretize_zoh(to_state_space(build_plant(coeffs)), Ts)
    linear = simulate(activation, stim)

    torque = np.empty(stim.size)
    x_act = activation.zero_state()
    x_arm = arm.zero_state()
    velocity = 0.0
    for k, w in enumerate(stim):
        recruited = h_irc(h_irc_inverse(w, mp), mp) if compensate else h_irc(w, mp)
        active, x_act = activation.step(x_act, recruited)

        theta = float(arm.Cd[0] @ x_arm)
        fa = f_ma(velocity / mp.theta_dot_max)
        fp = f_mp(1.0 + mp.moment_arm * theta / mp.l_max, mp.epsilon)
        if compensate:
            torque[k] = ((active / fa) * fa + fp) - fp
        else:
            torque[k] = active * fa + fp

        _, x_arm = arm.step(x_arm, torque[k])
        theta_next = float(arm.Cd[0] @ x_arm)
        velocity = (theta_next - theta) / Ts
    return torque, linear


def verify_linearization(
    mp: MuscleParams,
    test_inputs: ArrayLike,
    Ts: float,
    compensate: bool = True,
    coeffs: PlantCoefficients | None = None,
) -> float:
    """Max deviation between the compensated nonlinear muscle and its linear part.

    Raises:
        ModelError: If any input lies outside the invertible recruitment range.
    """
    inputs = np.atleast_1d(np.asarray(test_inputs, dtype=float)).ravel()
    bad = np.flatnonzero((inputs < 0) | (inputs >= mp.a1))
    if bad.size:
        raise ModelError(
            f"Input {inputs[bad[0]]} at sample {bad[0]} outside "
            f"invertible range [0, {mp.a1})"
        )
    torque, linear = simulate_muscle_chain(mp, inputs, Ts, coeffs, compensate)
    deviation = float(np.max(np.abs(torque - linear)))
    logger.debug(
        "Linearization deviation %.3e over %d samples (compensate=%s)",
        deviation,
        inputs.size,
        compensate,
    )
    return deviation
