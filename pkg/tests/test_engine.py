"""Tests for the trial loop, the scenario runner and the tracking metrics."""

import math
from dataclasses import replace

import numpy as np
import pytest

from fesilc.controllers import ConstraintState, IlcMemory
from fesilc.diagnostics import DivergenceError, KinematicsError, ModelError
from fesilc.engine import (
    _plateau_iteration,
    _settle_iteration,
    identify_velocity_bound,
    initial_constraint_level,
    nrmse,
    prepare_loop,
    rmse,
    run_scenario,
    run_trial,
)
from fesilc.models import (
    IlcInjection,
    PhaseLeadConfig,
    QFilterMode,
    RunReport,
    Scenario,
    ScenarioConfig,
)


@pytest.fixture(scope="module")
def feedback_report() -> RunReport:
    return run_scenario(ScenarioConfig(scenario=Scenario.FEEDBACK_ONLY))


@pytest.fixture(scope="module")
def constrained_report() -> RunReport:
    return run_scenario(ScenarioConfig(scenario=Scenario.FULL_CONSTRAINED))


def test_rmse_and_nrmse() -> None:
    """Known offsets give the expected errors."""
    assert rmse([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]) == 0.0
    assert rmse([1.0, 1.0], [0.0, 2.0]) == pytest.approx(1.0)
    assert nrmse([0.0, 2.0], [0.5, 2.5]) == pytest.approx(0.25)


def test_rmse_matches_explicit_sum() -> None:
    """RMSE equals the square root of the mean squared difference."""
    rng = np.random.default_rng(7)
    desired = rng.normal(size=100)
    actual = rng.normal(size=100)
    total = 0.0
    for d, a in zip(desired, actual):
        total += (d - a) ** 2
    assert rmse(desired, actual) == pytest.approx(math.sqrt(total / 100), abs=1e-12)


def test_metric_errors() -> None:
    """Length mismatches, empty series and flat references raise."""
    with pytest.raises(ModelError):
        rmse([0.0, 1.0], [0.0])
    with pytest.raises(ModelError):
        rmse([], [])
    with pytest.raises(ModelError, match="zero range"):
        nrmse([1.0, 1.0], [1.0, 1.0])


def test_prepare_loop_shapes() -> None:
    """The actuator stacks muscle and arm states and the reference is sampled."""
    blocks = prepare_loop(ScenarioConfig())
    assert blocks.controller.n_states == 1
    assert blocks.actuator.n_states == 4
    assert len(blocks.trajectory) == 201
    assert blocks.kinematics.line_angle == pytest.approx(math.pi / 4)


def test_feedback_trial_tracks_ramp(feedback_report: RunReport) -> None:
    """The phase-lead loop lags the ramp by a constant error."""
    trial = feedback_report.final
    assert len(feedback_report.trials) == 16
    assert trial.rmse == pytest.approx(0.0168, rel=0.10)
    assert trial.e[-1] == pytest.approx(0.016348, rel=0.05)
    assert trial.r[0] == 0.0
    assert trial.r_dot[0] == 0.0
    assert not np.any(trial.u_ff)
    assert trial.constraint_bound is None
    assert trial.nrmse == pytest.approx(trial.rmse / trial.r_d[-1])


def test_feedback_trials_are_identical(feedback_report: RunReport) -> None:
    """Without learning every iteration repeats the first."""
    first, last = feedback_report.trials[0], feedback_report.trials[-1]
    np.testing.assert_array_equal(first.r, last.r)
    assert feedback_report.monotone
    assert feedback_report.r_dot_max is None
    assert feedback_report.velocity_bound_held is None


def test_doubling_kp_halves_steady_error() -> None:
    """Ramp-following error is inversely proportional to Kp."""
    base = ScenarioConfig(duration=40.0, iterations=1)
    stiff = ScenarioConfig(duration=40.0, iterations=1, lead=PhaseLeadConfig(kp=20.0))
    e_base = run_scenario(base).final.e[-1]
    e_stiff = run_scenario(stiff).final.e[-1]
    assert e_stiff == pytest.approx(e_base / 2, rel=0.05)


def test_zero_length_reference_stays_at_rest() -> None:
    """A stationary target gives zero error and an undefined NRMSE."""
    cfg = ScenarioConfig(start=(0.1, 0.1), end=(0.1, 0.1), iterations=1)
    trial = run_trial(cfg)
    assert trial.rmse == 0.0
    assert math.isnan(trial.nrmse)
    assert not np.any(trial.r_dot)


def test_run_trial_rejects_feedforward_length() -> None:
    """The learned input must cover every sample."""
    cfg = ScenarioConfig()
    with pytest.raises(ModelError):
        run_trial(cfg, ilc=IlcMemory.zeros(10, 0.1, 2.5))


def test_run_trial_detects_divergence() -> None:
    """A non-finite feedforward stops the trial at the first sample."""
    cfg = ScenarioConfig(scenario=Scenario.FEEDBACK_PLUS_PILC)
    n = cfg.sample_count
    ilc = IlcMemory(
        feedforward=np.full(n, np.inf),
        error=np.zeros(n),
        learning_gain=0.1,
        q_cutoff=2.5,
    )
    with pytest.raises(DivergenceError, match="sample 0 of iteration 3"):
        run_trial(cfg, ilc=ilc, iteration=3)


def test_run_trial_reports_sample_leaving_workspace() -> None:
    """An output beyond the arm's reach names the sample and the iteration."""
    cfg = ScenarioConfig(scenario=Scenario.FEEDBACK_PLUS_PILC)
    n = cfg.sample_count
    ilc = IlcMemory.zeros(n, 0.1, 2.5)
    ilc.feedforward = np.full(n, 5.0)
    pattern = r"at sample \d+ of iteration 4"
    with pytest.raises(KinematicsError, match=pattern) as info:
        run_trial(cfg, ilc=ilc, iteration=4)
    assert info.value.iteration == 4
    assert info.value.sample is not None and info.value.sample > 0


def test_run_trial_saturates_at_constraint_bound() -> None:
    """With a constraint the feedback output never exceeds max(V)."""
    cfg = ScenarioConfig(scenario=Scenario.FULL_CONSTRAINED)
    cs = ConstraintState.constant(0.05, cfg.sample_count, psi=0.01, r_dot_max=0.05)
    trial = run_trial(cfg, cs=cs)
    assert np.max(np.abs(trial.u_applied)) <= 0.05 + 1e-15
    assert trial.constraint_bound == 0.05
    assert trial.constrained_pd_energy <= trial.pd_energy


def test_serial_injection_adds_feedforward_to_command() -> None:
    """In serial mode the learned input bypasses the compensator."""
    cfg = ScenarioConfig(
        scenario=Scenario.FEEDBACK_PLUS_PILC, injection=IlcInjection.SERIAL
    )
    n = cfg.sample_count
    ilc = IlcMemory.zeros(n, 0.1, 2.5)
    ilc.feedforward = np.full(n, 0.01)
    trial = run_trial(cfg, ilc=ilc)
    np.testing.assert_allclose(trial.u_applied, trial.u_fb + 0.01)


PUBLISHED_GAINS = (0.1, 0.2, 0.8, 0.9)


@pytest.fixture(scope="module")
def pilc_reports() -> dict[float, RunReport]:
    return {
        gain: run_scenario(
            ScenarioConfig(scenario=Scenario.FEEDBACK_PLUS_PILC, learning_gain=gain)
        )
        for gain in PUBLISHED_GAINS
    }


@pytest.mark.parametrize("gain", PUBLISHED_GAINS)
def test_pilc_sixteen_iterations(
    gain: float, pilc_reports: dict[float, RunReport]
) -> None:
    """Each published gain learns monotonically and settles in gain order."""
    report = pilc_reports[gain]
    errors = report.rmse_series
    assert len(errors) == 16
    assert errors[0] == pytest.approx(0.0168, rel=0.10)
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert report.monotone
    assert not any(d.severity == "error" for d in report.diagnostics)
    if gain == 0.1:
        assert errors[1] == pytest.approx(0.0152, rel=0.15)
        assert errors[-1] == pytest.approx(0.0066, rel=0.15)
    if gain == 0.9:
        assert errors[1] == pytest.approx(0.0060, rel=0.15)

    settle = {g: r.settle_iteration for g, r in pilc_reports.items()}
    assert settle[0.9] <= settle[0.8] < settle[0.2] < settle[0.1]


def test_pilc_second_iteration_improves_with_gain(
    pilc_reports: dict[float, RunReport],
) -> None:
    """Larger learning gains reduce the second-iteration error further."""
    second = [pilc_reports[gain].rmse_series[1] for gain in PUBLISHED_GAINS]
    assert all(b < a for a, b in zip(second, second[1:]))


def test_pilc_feedforward_is_zero_on_first_trial() -> None:
    """Learning only acts from the second trial on."""
    report = run_scenario(
        ScenarioConfig(scenario=Scenario.FEEDBACK_PLUS_PILC, iterations=2)
    )
    assert not np.any(report.trials[0].u_ff)
    assert np.any(report.trials[1].u_ff)


def test_pilc_causal_filter_runs() -> None:
    """The causal Q-filter without a lead also reduces the error at L = 0.1."""
    report = run_scenario(
        ScenarioConfig(
            scenario=Scenario.FEEDBACK_PLUS_PILC,
            q_mode=QFilterMode.CAUSAL,
            learning_lead=0.0,
            iterations=3,
        )
    )
    assert report.rmse_series[-1] < report.rmse_series[0]


def test_pilc_wide_causal_filter_stops_cleanly_at_high_gain() -> None:
    """A non-contracting learning loop ends the run with a diagnostic."""
    report = run_scenario(
        ScenarioConfig(
            scenario=Scenario.FEEDBACK_PLUS_PILC,
            learning_gain=0.9,
            q_cutoff_hz=0.40,
            q_mode=QFilterMode.CAUSAL,
            learning_lead=0.0,
        )
    )
    assert 1 < len(report.trials) < 16
    stop = next(d for d in report.diagnostics if d.code == "learning-diverged")
    assert stop.severity == "error"
    assert stop.iteration == len(report.trials) + 1
    assert stop.sample is not None


def test_identify_velocity_bound() -> None:
    """The bound is the peak speed of a feedback-only trial."""
    cfg = ScenarioConfig()
    bound = identify_velocity_bound(cfg)
    trial = run_trial(cfg)
    assert bound.r_dot_max == trial.max_velocity
    assert bound.pd_energy == trial.pd_energy
    assert bound.r_dot_max == pytest.approx(0.035, rel=0.15)


def test_initial_constraint_level() -> None:
    """V0 drives the hand at the margin times the bound in steady state."""
    cfg = ScenarioConfig()
    assert initial_constraint_level(cfg, 0.04) == pytest.approx(0.9 * 0.04 * 5.78)


def test_constrained_scenario_respects_velocity_bound(
    constrained_report: RunReport,
) -> None:
    """Every iteration stays at or below the identified speed bound."""
    report = constrained_report
    assert len(report.trials) == 13
    assert report.r_dot_max is not None
    for trial in report.trials:
        assert trial.max_velocity <= report.r_dot_max
    assert report.velocity_bound_held is True
    assert not any(d.code == "velocity-bound" for d in report.diagnostics)


def test_constrained_scenario_tracks_better_than_feedback(
    constrained_report: RunReport, feedback_report: RunReport
) -> None:
    """Learning under the constraint still beats feedback alone."""
    assert constrained_report.final.rmse <= feedback_report.final.rmse


def test_constrained_scenario_energy_and_bound(
    constrained_report: RunReport,
) -> None:
    """Saturation limits the PD energy and the bound only grows."""
    trials = constrained_report.trials
    for trial in trials:
        assert trial.constrained_pd_energy <= trial.pd_energy
    bounds = [trial.constraint_bound for trial in trials]
    assert all(b is not None for b in bounds)
    assert all(b >= a for a, b in zip(bounds, bounds[1:]))
    assert trials[-1].pd_energy > trials[0].pd_energy
    assert constrained_report.initial_pd_energy is not None
    expected_v0 = initial_constraint_level(
        constrained_report.config, constrained_report.r_dot_max
    )
    assert constrained_report.v0 == pytest.approx(expected_v0)


def test_constrained_scenario_uses_overrides() -> None:
    """Explicit r_dot_max and v0 replace the identified values."""
    cfg = ScenarioConfig(
        scenario=Scenario.FULL_CONSTRAINED, r_dot_max=0.05, v0=0.2, iterations=2
    )
    report = run_scenario(cfg)
    assert report.r_dot_max == 0.05
    assert report.v0 == 0.2
    assert report.trials[0].constraint_bound == pytest.approx(0.2)


def test_scenario_run_is_deterministic() -> None:
    """Identical configurations give bit-identical results."""
    cfg = ScenarioConfig(scenario=Scenario.FEEDBACK_PLUS_PILC, iterations=3)
    first = run_scenario(cfg)
    second = run_scenario(cfg)
    assert first.rmse_series == second.rmse_series
    np.testing.assert_array_equal(first.final.u_applied, second.final.u_applied)


@pytest.mark.parametrize(
    "errors, expected",
    [([0.02, 0.015, 0.01499, 0.0149], 3), ([0.02, 0.01, 0.005], None), ([0.1], None)],
)
def test_plateau_iteration(errors: list[float], expected: int | None) -> None:
    """First iteration whose RMSE change falls under the tolerance."""
    assert _plateau_iteration(errors) == expected


def test_settle_iteration() -> None:
    """First iteration within five percent of the final RMSE."""
    assert _settle_iteration([0.02, 0.0104, 0.0101, 0.01]) == 2
    assert _settle_iteration([]) is None


def test_report_flags_rmse_increase() -> None:
    """An aggressive gain that overshoots is reported as non-monotone."""
    report = run_scenario(
        ScenarioConfig(
            scenario=Scenario.FEEDBACK_PLUS_PILC,
            learning_gain=3.0,
            q_mode=QFilterMode.OFF,
            iterations=3,
        )
    )
    assert not report.monotone
    assert any(d.code == "rmse-increase" for d in report.diagnostics)


def test_constrained_scenario_with_stationary_target() -> None:
    """A zero identified bound disables the constraint instead of failing."""
    cfg = ScenarioConfig(
        scenario=Scenario.FULL_CONSTRAINED, start=(0.1, 0.1), end=(0.1, 0.1)
    )
    assert identify_velocity_bound(cfg) == (0.0, 0.0)
    report = run_scenario(replace(cfg, iterations=2))
    assert report.r_dot_max == 0.0
    assert report.v0 == 0.0
    assert len(report.trials) == 2
    assert all(trial.constraint_bound is None for trial in report.trials)
    assert report.velocity_bound_held is True
    assert any(d.code == "degenerate-bound" for d in report.diagnostics)
