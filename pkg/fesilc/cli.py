"""
Command-line interface for fesilc.
"""

import logging
import math
import sys
from collections.abc import Callable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TypeVar

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .config import build_config, load_config_file, parse_value
from .controllers import build_phase_lead, build_q_filter
from .engine import run_scenario
from .kinematics import line_trajectory, task_line_angle
from .lti import bandwidth_3db, feedback_unity, series
from .models import (
    IlcInjection,
    QFilterMode,
    ReferenceProfile,
    RunReport,
    Scenario,
    ScenarioConfig,
)
from .output import emit_outputs, write_trajectory_csv
from .plant import (
    build_muscle_linear,
    build_plant,
    compute_b_a3,
    implied_k_m2,
    verify_linearization,
)

console = Console()

F = TypeVar("F", bound=Callable[..., Any])

DEFAULT_OUTPUT_DIR = Path("fesilc-output")
DEFAULT_SWEEP_GAINS = "0.1,0.2,0.8,0.9"
LINEARIZATION_TOLERANCE = 1e-6

# CLI option name -> config key
OVERRIDE_KEYS = {
    "gain": "learning_gain",
    "q_mode": "q_mode",
    "learning_lead": "learning_lead",
    "injection": "injection",
    "profile": "profile",
    "psi": "psi",
    "r_dot_max": "r_dot_max",
    "kp": "lead.kp",
    "kd": "lead.kd",
}


@contextmanager
def spinner(task_description: str) -> Iterator[None]:
    """Show a Rich spinner while performing a task."""
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
        transient=True,
    ) as progress:
        progress.add_task(task_description, total=None)
        yield


def configure_logging(verbosity: int) -> None:
    """Route package logs through a Rich handler on the shared console."""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    package_logger = logging.getLogger("fesilc")
    package_logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in package_logger.handlers):
        package_logger.addHandler(
            RichHandler(console=console, show_path=False, markup=False)
        )


def parse_gain_list(text: str) -> list[float]:
    """
    Parse a comma-separated list of learning gains.

    Args:
        text: Gains such as "0.1,0.2,0.8,0.9"

    Returns:
        Gains in input order.
    """
    gains: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ValueError("Gain list contains an empty value")
        value = float(part)
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"Learning gain must be positive, got {part}")
        gains.append(value)
    return gains


def _gain_list_callback(
    ctx: click.Context, param: click.Parameter, value: str
) -> list[float]:
    try:
        return parse_gain_list(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def _level_list_callback(
    ctx: click.Context, param: click.Parameter, value: str
) -> list[float]:
    try:
        levels = parse_gain_list(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None
    if any(level >= 1.0 for level in levels):
        raise click.BadParameter("Levels must lie below 1 (the recruitment ceiling)")
    return levels


@dataclass
class CliConfig:
    """Parsed command line of one invocation."""

    command: str
    scenario: Scenario | None = None
    gains: list[float] = field(default_factory=list)
    iterations: int | None = None
    output_dir: Path | None = None
    config_path: Path | None = None
    paper_faithful: bool = False
    safety: bool = True
    overrides: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_params(cls, command: str, params: Mapping[str, Any]) -> "CliConfig":
        """Build from the parameter mapping click hands to a command."""
        scenario: Scenario | None = None
        if params.get("scenario") is not None:
            scenario = Scenario(int(params["scenario"]))
        elif command == "sweep":
            scenario = Scenario.FEEDBACK_PLUS_PILC

        overrides: dict[str, Any] = {}
        for name, key in OVERRIDE_KEYS.items():
            value = params.get(name)
            if value is None:
                continue
            if isinstance(value, str):
                value = parse_value(key, value)
            overrides[key] = value

        return cls(
            command=command,
            scenario=scenario,
            gains=list(params.get("gains") or []),
            iterations=params.get("iterations"),
            output_dir=params.get("output_dir"),
            config_path=params.get("config_path"),
            paper_faithful=bool(params.get("paper_faithful", False)),
            safety=bool(params.get("safety", True)),
            overrides=overrides,
        )

    def scenario_config(self) -> ScenarioConfig:
        """Layer flags over the config file over the built-in defaults."""
        file_values = load_config_file(self.config_path) if self.config_path else {}
        flags = dict(self.overrides)
        if self.scenario is not None:
            flags["scenario"] = self.scenario
        if self.iterations is not None:
            flags["iterations"] = self.iterations
        return build_config(file_values, flags, paper_faithful=self.paper_faithful)


def model_options(f: F) -> F:
    """Options shared by every command that builds a scenario config."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="Config file with key = value lines",
        ),
        click.option(
            "--paper-faithful",
            is_flag=True,
            help="Lock model parameters to the published values",
        ),
        click.option(
            "--profile",
            type=click.Choice([p.value for p in ReferenceProfile]),
            help="Reference time profile",
        ),
        click.option("--kp", type=float, help="Proportional gain of the lead"),
        click.option("--kd", type=float, help="Derivative gain of the lead"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def learning_options(f: F) -> F:
    """Options for commands that run trials."""
    options = [
        click.option(
            "--iterations",
            "-n",
            type=click.IntRange(min=1),
            help="Number of trials (default: 16, or 13 for scenario 3)",
        ),
        click.option(
            "--q-mode",
            type=click.Choice([m.value for m in QFilterMode]),
            help="How the Q-filter is applied",
        ),
        click.option(
            "--learning-lead",
            type=click.FloatRange(min=0.0),
            help="Seconds the learning update looks ahead in the error",
        ),
        click.option(
            "--injection",
            type=click.Choice([m.value for m in IlcInjection]),
            help="Where the learned input enters the loop",
        ),
        click.option("--psi", type=float, help="Constraint learning rate"),
        click.option(
            "--r-dot-max",
            type=float,
            help="Velocity bound in m/s instead of the identified one",
        ),
        click.option(
            "--output-dir",
            "-o",
            type=click.Path(file_okay=False, path_type=Path),
            default=DEFAULT_OUTPUT_DIR,
            envvar="FESILC_OUTPUT_DIR",
            show_default=True,
            help="Directory for CSV traces and reports",
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def display_summary_table(report: RunReport) -> None:
    """Display per-iteration metrics of a run."""
    cfg = report.config
    table = Table(
        title=f"Scenario {cfg.scenario.value}: {cfg.scenario.label}",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("Iter", justify="right", style="dim")
    table.add_column("RMSE m (NRMSE)", justify="right")
    table.add_column("PD energy", justify="right")
    table.add_column("Constrained", justify="right")
    table.add_column("Max ṙ m/s", justify="right")
    table.add_column("Bound", justify="right")

    for trial in report.trials:
        nrmse = "-" if math.isnan(trial.nrmse) else f"{trial.nrmse:.4f}"
        bound = (
            "-" if trial.constraint_bound is None else f"{trial.constraint_bound:.4f}"
        )
        table.add_row(
            str(trial.iteration),
            f"{trial.rmse:.4f} ({nrmse})",
            f"{trial.pd_energy:.4f}",
            f"{trial.constrained_pd_energy:.4f}",
            f"{trial.max_velocity:.4f}",
            bound,
        )
    console.print(table)

    lines = [
        f"Plateau: {report.plateau_iteration or 'not reached'}",
        f"Settled (5%): {report.settle_iteration or '-'}",
        f"Monotone: {'yes' if report.monotone else 'no'}",
    ]
    if report.r_dot_max is not None:
        held = (
            "[green]held[/green]"
            if report.velocity_bound_held
            else "[red]violated[/red]"
        )
        lines.append(f"Velocity bound {report.r_dot_max:.4f} m/s: {held}")
        lines.append(f"Initial constraint level: {report.v0:.4f}")
    for diagnostic in report.diagnostics:
        if diagnostic.severity != "info":
            lines.append(f"[yellow]{escape(str(diagnostic))}[/yellow]")
    console.print(Panel("\n".join(lines), title="Convergence", expand=False))


@click.group()
@click.version_option(version=__version__, prog_name="fesilc")
@click.option("--verbose", "-v", count=True, help="Log progress (-vv for debug)")
def cli(verbose: int) -> None:
    """
    fesilc - Simulate FES + robot rehabilitation with iterative learning control.

    Runs the feedback-only, P-ILC and velocity-constrained scenarios and
    writes per-iteration traces and summaries.
    """
    configure_logging(verbose)


@cli.command()
@click.option(
    "--scenario",
    "-s",
    type=click.Choice(["1", "2", "3"]),
    help="1: feedback (default), 2: + P-ILC, 3: + velocity constraint",
)
@click.option("--gain", "-L", type=float, help="ILC learning gain L")
@click.option(
    "--safety/--no-safety",
    default=True,
    help="Fail when a scenario-3 trial exceeds the velocity bound",
)
@learning_options
@model_options
def run(**params: Any) -> None:
    """Run one scenario and write its traces."""
    cli_config = CliConfig.from_params("run", params)
    try:
        cfg = cli_config.scenario_config()
        with spinner(f"Running scenario {cfg.scenario.value}..."):
            report = run_scenario(cfg)
        output_dir = cli_config.output_dir or DEFAULT_OUTPUT_DIR
        run_dir = output_dir / f"scenario_{cfg.scenario.value}"
        written = emit_outputs(report, run_dir)
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)

    display_summary_table(report)
    console.print(f"[green]✓[/green] Wrote {len(written)} file(s) to {run_dir}")
    if cli_config.safety and report.velocity_bound_held is False:
        raise click.ClickException("Velocity bound violated; see report.txt")


@cli.command()
@click.option(
    "--gains",
    default=DEFAULT_SWEEP_GAINS,
    show_default=True,
    callback=_gain_list_callback,
    help="Comma-separated learning gains",
)
@learning_options
@model_options
def sweep(**params: Any) -> None:
    """Run scenario 2 once per learning gain."""
    cli_config = CliConfig.from_params("sweep", params)
    reports: list[tuple[float, RunReport]] = []
    try:
        base = cli_config.scenario_config()
        output_dir = cli_config.output_dir or DEFAULT_OUTPUT_DIR
        for gain in cli_config.gains:
            cfg = replace(base, learning_gain=gain)
            with spinner(f"Running L = {gain}..."):
                report = run_scenario(cfg)
            emit_outputs(report, output_dir / f"gain_{gain}")
            reports.append((gain, report))
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)

    table = Table(
        title="RMSE m (NRMSE) per learning gain",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("Iter", justify="right", style="dim")
    for gain, _ in reports:
        table.add_column(f"L = {gain}", justify="right")
    rows = max(len(report.trials) for _, report in reports)
    for k in range(rows):
        cells = [str(k + 1)]
        for _, report in reports:
            trial = report.trials[k]
            cells.append(f"{trial.rmse:.4f} ({trial.nrmse:.4f})")
        table.add_row(*cells)
    console.print(table)
    plateaus = ", ".join(
        f"L = {gain}: {report.plateau_iteration or '-'}" for gain, report in reports
    )
    console.print(f"Plateau iteration: {plateaus}")


@cli.command(name="inspect")
@model_options
def inspect_model(**params: Any) -> None:
    """Show the closed-loop model and derived constants."""
    cli_config = CliConfig.from_params("inspect", params)
    try:
        cfg = cli_config.scenario_config()
        lead = build_phase_lead(cfg.lead)
        forward = series(
            series(lead, build_muscle_linear(cfg.muscle)), build_plant(cfg.plant)
        )
        closed = feedback_unity(forward)
        bandwidth = bandwidth_3db(closed)
        b_a3 = compute_b_a3(cfg.arm)
        k_m2 = implied_k_m2(cfg.arm, cfg.plant)
        q_filter = build_q_filter(cfg.q_cutoff_hz)
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)

    table = Table(title="Loop model", show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value")
    table.add_row("Phase lead", str(lead))
    table.add_row("Muscle", str(build_muscle_linear(cfg.muscle)))
    table.add_row("Plant", str(build_plant(cfg.plant)))
    table.add_row("Closed loop", str(closed))
    table.add_row(
        "-3 dB bandwidth",
        f"{bandwidth:.4f} rad/s ({bandwidth / (2 * math.pi):.4f} Hz)",
    )
    table.add_row(
        "Q-filter", f"{q_filter} ({cfg.q_cutoff_hz} Hz, {cfg.q_mode.value})"
    )
    table.add_row(
        "Learning lead", f"{cfg.learning_lead} s ({cfg.lead_samples} samples)"
    )
    table.add_row("b_a3", f"{b_a3:.6f}")
    table.add_row("Implied K_M2", f"{k_m2:.6f}")
    table.add_row(
        "FES carrier", f"{cfg.fes.amplitude_ma} mA, {cfg.fes.frequency_hz} Hz"
    )
    console.print(table)


@cli.command()
@click.option(
    "--output",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("trajectory.csv"),
    show_default=True,
    help="CSV file to write",
)
@model_options
def trajectory(output: Path, **params: Any) -> None:
    """Export the reference trajectory as t,r_d,x,y."""
    cli_config = CliConfig.from_params("trajectory", params)
    try:
        cfg = cli_config.scenario_config()
        traj = line_trajectory(cfg.start, cfg.end, cfg.duration, cfg.ts, cfg.profile)
        write_trajectory_csv(traj, output)
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)

    dx = cfg.end[0] - cfg.start[0]
    dy = cfg.end[1] - cfg.start[1]
    console.print(
        f"[green]✓[/green] {len(traj)} samples, magnitude {traj.magnitude:.4f} m, "
        f"line angle {task_line_angle(dy, dx):.4f} rad -> {output}"
    )


@cli.command(name="check-linearization")
@click.option(
    "--levels",
    default="0.1,0.5,0.9",
    show_default=True,
    callback=_level_list_callback,
    help="Step and ramp amplitudes as fractions of a1",
)
@model_options
def check_linearization(levels: list[float], **params: Any) -> None:
    """Check that the inverse blocks cancel the muscle nonlinearities."""
    cli_config = CliConfig.from_params("check-linearization", params)
    try:
        cfg = cli_config.scenario_config()
        n = cfg.sample_count
        rows = []
        for level in levels:
            amplitude = level * cfg.muscle.a1
            for shape, signal in (
                ("step", np.full(n, amplitude)),
                ("ramp", np.linspace(0.0, amplitude, n)),
            ):
                rows.append(
                    (
                        shape,
                        amplitude,
                        verify_linearization(cfg.muscle, signal, cfg.ts),
                        verify_linearization(
                            cfg.muscle, signal, cfg.ts, compensate=False
                        ),
                    )
                )
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(1)

    table = Table(
        title="Linearization check", show_header=True, header_style="bold magenta"
    )
    table.add_column("Input")
    table.add_column("Amplitude", justify="right")
    table.add_column("Compensated", justify="right")
    table.add_column("Uncompensated", justify="right")
    failures = 0
    for shape, amplitude, compensated, raw in rows:
        ok = compensated <= LINEARIZATION_TOLERANCE
        failures += not ok
        style = "green" if ok else "red"
        table.add_row(
            shape,
            f"{amplitude:.3f}",
            f"[{style}]{compensated:.2e}[/{style}]",
            f"{raw:.2e}",
        )
    console.print(table)
    if failures:
        raise click.ClickException(
            f"{failures} input(s) exceed deviation {LINEARIZATION_TOLERANCE}"
        )


def parse_args(argv: Sequence[str]) -> CliConfig:
    """
    Parse a command line without running the command.

    Args:
        argv: Arguments after the program name, starting with the command

    Returns:
        CliConfig for the command.

    Raises:
        click.UsageError: For unknown commands, unknown flags or bad values.
    """
    args = list(argv)
    if not args:
        raise click.UsageError("Missing command")
    name, rest = args[0], args[1:]
    command = cli.commands.get(name)
    if command is None:
        raise click.UsageError(f"No such command '{name}'")
    with command.make_context(name, rest) as ctx:
        return CliConfig.from_params(name, ctx.params)


def main() -> None:
    """Main entry point for CLI."""
    cli()


if __name__ == "__main__":
    main()
