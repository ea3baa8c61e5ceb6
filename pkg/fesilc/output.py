"""CSV traces, iteration summaries and plain-text run reports."""

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

from .config import format_config
from .diagnostics import OutputError
from .kinematics import TaskTrajectory
from .models import RunReport, TrialRecord

logger = logging.getLogger(__name__)

TRIAL_HEADER = ("t", "r_d", "r", "e", "u_fb", "u_ff", "u_applied", "r_dot")
SUMMARY_HEADER = (
    "iteration",
    "rmse_m",
    "nrmse",
    "pd_energy",
    "max_velocity_mps",
    "constraint_bound",
)
TRAJECTORY_HEADER = ("t", "r_d", "x", "y")


def format_number(value: float | None) -> str:
    """Shortest round-trip text for a float; empty for a missing value."""
    if value is None:
        return ""
    return repr(float(value))


def _write_rows(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]
) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputError(f"Cannot write {path}: {exc.strerror}") from exc


def trial_rows(trial: TrialRecord) -> Iterable[list[str]]:
    columns = [getattr(trial, name) for name in TRIAL_HEADER]
    for k in range(len(trial)):
        yield [format_number(col[k]) for col in columns]


def summary_rows(report: RunReport) -> Iterable[list[str]]:
    for trial in report.trials:
        yield [
            str(trial.iteration),
            format_number(trial.rmse),
            format_number(trial.nrmse),
            format_number(trial.pd_energy),
            format_number(trial.max_velocity),
            format_number(trial.constraint_bound),
        ]


def write_trajectory_csv(trajectory: TaskTrajectory, path: Path) -> Path:
    """Write a reference trajectory as ``t,r_d,x,y`` rows."""
    rows = (
        [format_number(a), format_number(b), format_number(c), format_number(d)]
        for a, b, c, d in zip(trajectory.t, trajectory.r_d, trajectory.x, trajectory.y)
    )
    _write_rows(path, TRAJECTORY_HEADER, rows)
    return path


def format_report(report: RunReport) -> str:
    """Plain-text report: config echo, per-iteration metrics, diagnostics."""
    cfg = report.config
    lines = [
        f"fesilc run report: scenario {cfg.scenario.value} ({cfg.scenario.label})",
        "",
        "[config]",
        format_config(cfg).rstrip("\n"),
        "",
        "[identification]",
    ]
    if report.r_dot_max is None:
        lines.append("not used")
    else:
        lines.append(f"r_dot_max = {format_number(report.r_dot_max)}")
        lines.append(f"v0 = {format_number(report.v0)}")
        lines.append(f"initial_pd_energy = {format_number(report.initial_pd_energy)}")

    lines += ["", "[iterations]"]
    lines.append(
        f"{'iter':>4}  {'rmse_m':>10}  {'nrmse':>8}  {'pd_energy':>10}  "
        f"{'max_vel':>10}  {'bound':>10}"
    )
    for trial in report.trials:
        bound = (
            "-" if trial.constraint_bound is None else f"{trial.constraint_bound:.6f}"
        )
        nrmse = "-" if math.isnan(trial.nrmse) else f"{trial.nrmse:.4f}"
        lines.append(
            f"{trial.iteration:>4}  {trial.rmse:>10.6f}  {nrmse:>8}  "
            f"{trial.pd_energy:>10.6f}  {trial.max_velocity:>10.6f}  {bound:>10}"
        )

    lines += ["", "[convergence]"]
    lines.append(f"plateau_iteration = {report.plateau_iteration or 'none'}")
    lines.append(f"settle_iteration = {report.settle_iteration or 'none'}")
    lines.append(f"monotone = {'yes' if report.monotone else 'no'}")
    if report.velocity_bound_held is not None:
        held = "yes" if report.velocity_bound_held else "no"
        lines.append(f"velocity_bound_held = {held}")

    lines += ["", "[diagnostics]"]
    if report.diagnostics:
        lines.extend(str(d) for d in report.diagnostics)
    else:
        lines.append("none")
    return "\n".join(lines) + "\n"


def emit_outputs(report: RunReport, directory: Path) -> list[Path]:
    """
    Write every trial trace, the summary table and the run report.

    Args:
        report: Completed run
        directory: Target directory, created if missing

    Returns:
        Paths of the written files.

    Raises:
        OutputError: If a file or the directory cannot be written.
    """
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"Cannot create {directory}: {exc.strerror}") from exc

    written: list[Path] = []
    for trial in report.trials:
        path = directory / f"trial_{trial.iteration}.csv"
        _write_rows(path, TRIAL_HEADER, trial_rows(trial))
        written.append(path)

    summary = directory / "summary.csv"
    _write_rows(summary, SUMMARY_HEADER, summary_rows(report))
    written.append(summary)

    report_path = directory / "report.txt"
    try:
        report_path.write_text(format_report(report), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"Cannot write {report_path}: {exc.strerror}") from exc
    written.append(report_path)
    logger.info("Wrote %d file(s) to %s", len(written), directory)
    return written
