"""Fixed-step trial loop, scenario runner and tracking metrics."""

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .controllers import (
    ConstraintState,
    IlcMemory,
    build_phase_lead,
    dilc_update,
    fes_modulate,
    ilc_update,
    saturate,
)
from .diagnostics import Diagnostic, DivergenceError, KinematicsError, ModelError
from .kinematics import (
    ArmKinematics,
    TaskTrajectory,
    VelocityProfile,
    inverse_kinematics,
    line_trajectory,
    resultant_velocity,
)
from .lti import (
    DiscreteSystem,
    cascade,
    discretize_tustin,
    discretize_zoh,
    series,
    to_state_space,
)
from .models import (
    FloatArray,
    IlcInjection,
    RunReport,
    Scenario,
    ScenarioConfig,
    TrialRecord,
)
from .plant import build_muscle_linear, build_plant, build_plant_velocity

logger = logging.getLogger(__name__)

PLATEAU_TOLERANCE = 1e-4  # m
SETTLE_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class LoopBlocks:
    """Discretized loop elements shared by every trial of a scenario."""

    controller: DiscreteSystem
    actuator: DiscreteSystem
    torque_output: FloatArray
    trajectory: TaskTrajectory
    kinematics: ArmKinematics


class VelocityBound(NamedTuple):
    """Speed bound and PD energy identified from a feedback-only trial."""

    r_dot_max: float
    pd_energy: float


def prepare_loop(cfg: ScenarioConfig) -> LoopBlocks:
    """Discretize controller and actuator and sample the reference at ``cfg.ts``.

    The compensator is discretized with Tustin, the muscle and plant together
    with an exact zero-order hold. Muscle states come first in the actuator
    so the muscle torque stays observable.
    """
    controller = discretize_tustin(to_state_space(build_phase_lead(cfg.lead)), cfg.ts)
    muscle = to_state_space(build_muscle_linear(cfg.muscle))
    arm = to_state_space(build_plant(cfg.plant))
    actuator = discretize_zoh(cascade(muscle, arm), cfg.ts)
    torque_output = np.concatenate([muscle.C[0], np.zeros(arm.n_states)])
    torque_output.setflags(write=False)

    trajectory = line_trajectory(cfg.start, cfg.end, cfg.duration, cfg.ts, cfg.profile)
    kinematics = ArmKinematics.from_params(
        cfg.arm, line_origin=cfg.start, line_angle=trajectory.heading
    )
    return LoopBlocks(controller, actuator, torque_output, trajectory, kinematics)


def _rms(values: ArrayLike) -> float:
    arr = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(arr * arr))) if arr.size else 0.0


def rmse(desired: ArrayLike, actual: ArrayLike) -> float:
    """Root-mean-square difference of two equally long series."""
    d = np.atleast_1d(np.asarray(desired, dtype=float))
    a = np.atleast_1d(np.asarray(actual, dtype=float))
    if d.shape != a.shape:
        raise ModelError(f"Series lengths differ: {d.size} vs {a.size}")
    if d.size == 0:
        raise ModelError("RMSE needs at least one sample")
    return _rms(d - a)


def nrmse(desired: ArrayLike, actual: ArrayLike) -> float:
    """RMSE normalized by the range of the desired series."""
    d = np.atleast_1d(np.asarray(desired, dtype=float))
    span = float(np.max(d) - np.min(d)) if d.size else 0.0
    if span == 0.0:
        raise ModelError("NRMSE is undefined for a reference with zero range")
    return rmse(d, actual) / span


def _elbow_angles(kin: ArmKinematics, r: FloatArray, iteration: int) -> FloatArray:
    theta_f = np.empty(r.size)
    for k, distance in enumerate(r):
        try:
            theta_f[k] = inverse_kinematics(kin, *kin.line_point(float(distance)))[1]
        except KinematicsError as exc:
            raise KinematicsError(str(exc), sample=k, iteration=iteration) from exc
    return theta_f


def run_trial(
    cfg: ScenarioConfig,
    ilc: IlcMemory | None = None,
    cs: ConstraintState | None = None,
    blocks: LoopBlocks | None = None,
    iteration: int = 1,
) -> TrialRecord:
    """
    Run one trial from rest and return its record.

    Per sample: the error uses the current plant output, the compensator
    acts on it (plus the learned input in reference injection), the output
    is saturated at the constraint bound, the learned input is added in
    serial injection, and the actuator advances one sample.

    Args:
        cfg: Scenario configuration
        ilc: Learning memory supplying the feedforward, if any
        cs: Constraint state supplying the saturation bound, if any
        blocks: Prepared loop elements; built from ``cfg`` when omitted
        iteration: Iteration number stored in the record

    Returns:
        TrialRecord with signals and metrics.

    Raises:
        DivergenceError: If the loop state becomes non-finite.
        KinematicsError: If the output leaves the reachable workspace.
    """
    blocks = blocks or prepare_loop(cfg)
    traj = blocks.trajectory
    n = len(traj)
    feedforward = np.zeros(n) if ilc is None else ilc.feedforward
    if feedforward.size != n:
        raise ModelError(f"Feedforward has {feedforward.size} samples, trial has {n}")
    bound = cs.bound if cs is not None else None
    serial = ilc is not None and cfg.injection is IlcInjection.SERIAL

    controller, actuator = blocks.controller, blocks.actuator
    x_ctrl = controller.zero_state()
    x_act = actuator.zero_state()
    r = np.empty(n)
    e = np.empty(n)
    u_fb = np.empty(n)
    u_sat = np.empty(n)
    u_applied = np.empty(n)
    torque = np.empty(n)

    for k in range(n):
        r[k] = float(actuator.Cd[0] @ x_act)
        torque[k] = float(blocks.torque_output @ x_act)
        e[k] = traj.r_d[k] - r[k]
        drive = e[k] if serial else e[k] + feedforward[k]
        u_fb[k], x_ctrl = controller.step(x_ctrl, drive)
        u_sat[k] = u_fb[k] if bound is None else saturate(u_fb[k], bound)
        u_applied[k] = u_sat[k] + feedforward[k] if serial else u_sat[k]
        _, x_act = actuator.step(x_act, u_applied[k])
        if not (math.isfinite(u_applied[k]) and np.all(np.isfinite(x_act))):
            raise DivergenceError(k, iteration)

    theta_f = _elbow_angles(blocks.kinematics, r, iteration)
    speed = resultant_velocity(blocks.kinematics, theta_f, cfg.ts).r_dot

    error_rmse = rmse(traj.r_d, r)
    span = float(np.max(traj.r_d) - np.min(traj.r_d))
    record = TrialRecord(
        iteration=iteration,
        t=traj.t.copy(),
        r_d=traj.r_d.copy(),
        r=r,
        e=e,
        theta_f=theta_f,
        u_fb=u_fb,
        u_ff=feedforward.copy(),
        u_applied=u_applied,
        r_dot=speed,
        muscle_torque=torque,
        pulse_width=fes_modulate(u_applied, cfg.fes),
        rmse=error_rmse,
        nrmse=error_rmse / span if span > 0 else math.nan,
        pd_energy=_rms(u_fb),
        constrained_pd_energy=_rms(u_sat),
        max_velocity=float(np.max(speed)),
        constraint_bound=bound,
    )
    logger.debug(
        "Trial %d: rmse=%.6f m, max velocity=%.6f m/s",
        iteration,
        record.rmse,
        record.max_velocity,
    )
    return record


def identify_velocity_bound(
    cfg: ScenarioConfig, blocks: LoopBlocks | None = None
) -> VelocityBound:
    """Peak resultant speed and PD energy of one feedback-only trial."""
    trial = run_trial(replace(cfg, scenario=Scenario.FEEDBACK_ONLY), blocks=blocks)
    logger.info(
        "Identified velocity bound %.6f m/s (PD energy %.6f)",
        trial.max_velocity,
        trial.pd_energy,
    )
    return VelocityBound(trial.max_velocity, trial.pd_energy)


def initial_constraint_level(cfg: ScenarioConfig, r_dot_max: float) -> float:
    """Stimulation level whose steady hand speed is ``margin * r_dot_max``."""
    speed_gain = series(
        build_muscle_linear(cfg.muscle), build_plant_velocity(cfg.plant)
    ).dc_gain()
    return cfg.constraint_margin * r_dot_max / speed_gain


def _plateau_iteration(errors: list[float]) -> int | None:
    for k in range(1, len(errors)):
        if abs(errors[k] - errors[k - 1]) < PLATEAU_TOLERANCE:
            return k + 1
    return None


def _settle_iteration(errors: list[float]) -> int | None:
    if not errors:
        return None
    final = errors[-1]
    for k, value in enumerate(errors):
        if abs(value - final) <= SETTLE_FRACTION * final:
            return k + 1
    return len(errors)


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """
    Run ``cfg.trial_count`` trials with learning between them.

    Scenarios 2 and 3 update the feedforward after every trial; scenario 3
    also learns the constraint levels. The velocity bound and the initial
    constraint level come from a feedback-only trial unless overridden.

    Args:
        cfg: Scenario configuration

    Returns:
        RunReport with every trial and the convergence flags.
    """
    logger.info("Running scenario %d (%s)", cfg.scenario.value, cfg.scenario.label)
    blocks = prepare_loop(cfg)
    report = RunReport(config=cfg)
    n = len(blocks.trajectory)

    ilc: IlcMemory | None = None
    if cfg.scenario.uses_ilc:
        ilc = IlcMemory.zeros(
            n,
            cfg.learning_gain,
            cfg.q_cutoff_rad,
            q_mode=cfg.q_mode,
            lead_samples=cfg.lead_samples,
            paper_faithful=cfg.paper_faithful,
        )

    cs: ConstraintState | None = None
    if cfg.scenario is Scenario.FULL_CONSTRAINED:
        identified = identify_velocity_bound(cfg, blocks)
        report.initial_pd_energy = identified.pd_energy
        report.r_dot_max = (
            cfg.r_dot_max if cfg.r_dot_max is not None else identified.r_dot_max
        )
        report.v0 = (
            cfg.v0
            if cfg.v0 is not None
            else initial_constraint_level(cfg, report.r_dot_max)
        )
        if report.r_dot_max > cfg.r_dot_min:
            cs = ConstraintState.constant(
                report.v0,
                n,
                psi=cfg.psi,
                r_dot_max=report.r_dot_max,
                r_dot_min=cfg.r_dot_min,
                strict_min=cfg.strict_bound,
            )
        else:
            logger.warning(
                "Identified velocity bound %.6f m/s leaves no room above %.6f m/s; "
                "running without the velocity constraint",
                report.r_dot_max,
                cfg.r_dot_min,
            )
            report.diagnostics.append(
                Diagnostic(
                    "warning",
                    "degenerate-bound",
                    f"identified velocity bound {report.r_dot_max:.6f} m/s does "
                    f"not exceed r_dot_min {cfg.r_dot_min:.6f} m/s; "
                    "constraint disabled",
                )
            )

    for k in range(1, cfg.trial_count + 1):
        try:
            trial = run_trial(cfg, ilc, cs, blocks=blocks, iteration=k)
        except (KinematicsError, DivergenceError) as exc:
            if k == 1:
                raise
            logger.error("Stopping after iteration %d: %s", k - 1, exc)
            report.diagnostics.append(
                Diagnostic(
                    "error",
                    "learning-diverged",
                    str(exc),
                    iteration=k,
                    sample=exc.sample,
                )
            )
            break
        report.trials.append(trial)
        if k == cfg.trial_count:
            break
        if ilc is not None:
            ilc.error = trial.e.copy()
            ilc_update(ilc, cfg.ts)
        if cs is not None:
            cs = dilc_update(cs, VelocityProfile(trial.t, trial.r_dot))

    _summarize(report)
    return report


def _summarize(report: RunReport) -> None:
    errors = report.rmse_series
    report.plateau_iteration = _plateau_iteration(errors)
    report.settle_iteration = _settle_iteration(errors)
    report.monotone = all(b <= a for a, b in zip(errors, errors[1:]))

    if report.plateau_iteration is not None:
        report.diagnostics.append(
            Diagnostic(
                "info",
                "plateau",
                f"RMSE changed by less than {PLATEAU_TOLERANCE} m",
                iteration=report.plateau_iteration,
            )
        )
    if not report.monotone:
        worse = next(k for k in range(1, len(errors)) if errors[k] > errors[k - 1])
        report.diagnostics.append(
            Diagnostic(
                "warning",
                "rmse-increase",
                "RMSE increased between iterations",
                iteration=worse + 1,
            )
        )

    if report.r_dot_max is not None:
        violations = [
            trial for trial in report.trials if trial.max_velocity > report.r_dot_max
        ]
        report.velocity_bound_held = not violations
        for trial in violations:
            logger.warning(
                "Iteration %d exceeded the velocity bound: %.6f > %.6f m/s",
                trial.iteration,
                trial.max_velocity,
                report.r_dot_max,
            )
            report.diagnostics.append(
                Diagnostic(
                    "error",
                    "velocity-bound",
                    f"max velocity {trial.max_velocity:.6f} m/s exceeds "
                    f"{report.r_dot_max:.6f} m/s",
                    iteration=trial.iteration,
                    sample=int(np.argmax(trial.r_dot)),
                )
            )
    logger.info(
        "Finished %d iteration(s); final rmse %.6f m",
        len(report.trials),
        errors[-1] if errors else math.nan,
    )
