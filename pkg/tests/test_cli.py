"""Tests for the fesilc command line."""

import csv
from pathlib import Path

import click
import pytest
from click.testing import CliRunner

from fesilc.cli import cli, parse_args, parse_gain_list
from fesilc.models import IlcInjection, QFilterMode, Scenario


def read_rows(path: Path) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def test_parse_gain_list_preserves_order() -> None:
    """Gains are parsed in the order given."""
    assert parse_gain_list("0.9, 0.1,0.2") == [0.9, 0.1, 0.2]


@pytest.mark.parametrize("text", ["0.1,,0.2", "0.1,-0.5", "0.1,abc", "0"])
def test_parse_gain_list_rejects_bad_values(text: str) -> None:
    """Empty, negative, zero and non-numeric gains raise a ValueError."""
    with pytest.raises(ValueError):
        parse_gain_list(text)


class TestParseArgs:
    """Parsing command lines without running them."""

    def test_run_flags(self) -> None:
        """Scenario, gain and learning flags land in the parsed config."""
        parsed = parse_args(
            [
                "run",
                "-s",
                "3",
                "-L",
                "0.5",
                "--q-mode",
                "zero_phase",
                "--learning-lead",
                "0.15",
                "--injection",
                "serial",
                "--kp",
                "12",
                "-n",
                "4",
                "--no-safety",
            ]
        )
        assert parsed.command == "run"
        assert parsed.scenario is Scenario.FULL_CONSTRAINED
        assert parsed.iterations == 4
        assert parsed.safety is False
        assert parsed.overrides == {
            "learning_gain": 0.5,
            "q_mode": QFilterMode.ZERO_PHASE,
            "learning_lead": 0.15,
            "injection": IlcInjection.SERIAL,
            "lead.kp": 12.0,
        }

    def test_run_defaults(self) -> None:
        """Without flags the run command simulates scenario 1."""
        parsed = parse_args(["run"])
        assert parsed.scenario is None
        assert parsed.output_dir == Path("fesilc-output")
        assert parsed.overrides == {}
        cfg = parsed.scenario_config()
        assert cfg.scenario is Scenario.FEEDBACK_ONLY
        assert cfg.trial_count == 16

    def test_sweep_defaults(self) -> None:
        """The sweep runs scenario 2 over the four published gains."""
        parsed = parse_args(["sweep"])
        assert parsed.scenario is Scenario.FEEDBACK_PLUS_PILC
        assert parsed.gains == [0.1, 0.2, 0.8, 0.9]

    def test_config_file_is_layered_under_flags(self, tmp_path: Path) -> None:
        """Flags override values read from --config."""
        path = tmp_path / "run.cfg"
        path.write_text(
            "scenario = 2\nlearning_gain = 0.2\nend_x = 0.15\n", encoding="utf-8"
        )
        parsed = parse_args(["run", "--config", str(path), "-L", "0.8"])
        cfg = parsed.scenario_config()
        assert cfg.learning_gain == 0.8
        assert cfg.end == (0.15, 0.2)
        assert cfg.scenario is Scenario.FEEDBACK_PLUS_PILC

    def test_paper_faithful_flag(self) -> None:
        """The paper-faithful switch is carried into the config."""
        parsed = parse_args(["inspect", "--paper-faithful"])
        assert parsed.paper_faithful
        assert parsed.scenario_config().paper_faithful

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["bogus"],
            ["run", "--scenario", "4"],
            ["run", "--frobnicate"],
            ["sweep", "--gains", "0.1,,0.2"],
            ["check-linearization", "--levels", "0.5,1.2"],
        ],
    )
    def test_usage_errors(self, argv: list[str]) -> None:
        """Unknown commands, flags and bad values are usage errors."""
        with pytest.raises(click.UsageError):
            parse_args(argv)


class TestCommands:
    """Invoking commands end to end."""

    def test_run_writes_traces(self, tmp_path: Path) -> None:
        """Each trial, the summary and the report are written."""
        result = CliRunner().invoke(cli, ["run", "-n", "2", "-o", str(tmp_path)])
        assert result.exit_code == 0, result.output

        run_dir = tmp_path / "scenario_1"
        assert sorted(p.name for p in run_dir.iterdir()) == [
            "report.txt",
            "summary.csv",
            "trial_1.csv",
            "trial_2.csv",
        ]
        trial = read_rows(run_dir / "trial_1.csv")
        assert trial[0] == ["t", "r_d", "r", "e", "u_fb", "u_ff", "u_applied", "r_dot"]
        assert len(trial) == 202
        summary = read_rows(run_dir / "summary.csv")
        assert summary[0][0] == "iteration"
        assert [row[0] for row in summary[1:]] == ["1", "2"]
        assert "Wrote 4 file(s)" in result.output

    def test_run_constrained_scenario(self, tmp_path: Path) -> None:
        """Scenario 3 reports the identified bound."""
        result = CliRunner().invoke(
            cli, ["run", "-s", "3", "-n", "2", "-o", str(tmp_path)]
        )
        assert result.exit_code == 0, result.output
        report = (tmp_path / "scenario_3" / "report.txt").read_text(encoding="utf-8")
        assert "r_dot_max = " in report
        assert "velocity_bound_held = yes" in report

    def test_output_dir_from_environment(self, tmp_path: Path) -> None:
        """FESILC_OUTPUT_DIR replaces the default output directory."""
        result = CliRunner().invoke(
            cli, ["run", "-n", "1"], env={"FESILC_OUTPUT_DIR": str(tmp_path)}
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "scenario_1" / "summary.csv").exists()

    def test_sweep_writes_one_directory_per_gain(self, tmp_path: Path) -> None:
        """Every gain of a sweep gets its own output directory."""
        result = CliRunner().invoke(
            cli, ["sweep", "--gains", "0.1,0.9", "-n", "2", "-o", str(tmp_path)]
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "gain_0.1" / "summary.csv").exists()
        assert (tmp_path / "gain_0.9" / "summary.csv").exists()
        assert "Plateau iteration" in result.output

    def test_default_sweep_completes(self, tmp_path: Path) -> None:
        """All four gains run their sixteen iterations without error."""
        result = CliRunner().invoke(cli, ["sweep", "-o", str(tmp_path)])
        assert result.exit_code == 0, result.output
        for gain in ("0.1", "0.2", "0.8", "0.9"):
            rows = read_rows(tmp_path / f"gain_{gain}" / "summary.csv")
            assert len(rows) == 17
        assert "learning-diverged" not in result.output

    def test_inspect_shows_bandwidth(self) -> None:
        """The model summary includes the closed-loop bandwidth."""
        result = CliRunner().invoke(cli, ["inspect"])
        assert result.exit_code == 0, result.output
        assert "2.41" in result.output

    def test_trajectory_export(self, tmp_path: Path) -> None:
        """The reference is written as t,r_d,x,y rows."""
        output = tmp_path / "ref.csv"
        result = CliRunner().invoke(
            cli, ["trajectory", "-o", str(output), "--profile", "smoothstep"]
        )
        assert result.exit_code == 0, result.output
        rows = read_rows(output)
        assert rows[0] == ["t", "r_d", "x", "y"]
        assert len(rows) == 202
        assert float(rows[-1][2]) == pytest.approx(0.2)

    def test_check_linearization_passes(self) -> None:
        """Default levels stay within the deviation tolerance."""
        result = CliRunner().invoke(cli, ["check-linearization"])
        assert result.exit_code == 0, result.output
        assert "Linearization check" in result.output

    def test_paper_faithful_rejects_gain_change(self, tmp_path: Path) -> None:
        """Changing model parameters in paper-faithful mode fails cleanly."""
        result = CliRunner().invoke(
            cli, ["run", "--paper-faithful", "--kp", "20", "-o", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "Error:" in result.output
        assert not (tmp_path / "scenario_1").exists()

    def test_bad_config_file_reports_line(self, tmp_path: Path) -> None:
        """Config errors are reported without a traceback."""
        path = tmp_path / "bad.cfg"
        path.write_text("ts = 0.05\nlearning_gain = fast\n", encoding="utf-8")
        result = CliRunner().invoke(
            cli, ["run", "--config", str(path), "-o", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "Error:" in result.output
        assert "learning_gain" in result.output

    def test_version(self) -> None:
        """The version option prints the program name."""
        result = CliRunner().invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "fesilc" in result.output
