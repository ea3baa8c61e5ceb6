"""Diagnostics and error types for simulation runs."""

from dataclasses import dataclass
from typing import Literal


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal finding collected while running a scenario."""

    severity: Literal["info", "warning", "error"]
    code: str
    message: str
    iteration: int | None = None
    sample: int | None = None

    def __str__(self) -> str:
        where = ""
        if self.iteration is not None:
            where = f" (iteration {self.iteration})"
        return f"[{self.severity}] {self.code}: {self.message}{where}"


class SimulationError(ValueError):
    """Base class for every error raised by fesilc."""


class ModelError(SimulationError):
    """Raised for invalid model parameters, signals or transfer functions."""


class KinematicsError(SimulationError):
    """Raised when a task-space point or joint configuration is unusable."""

    def __init__(
        self, message: str, sample: int | None = None, iteration: int | None = None
    ):
        self.sample = sample
        self.iteration = iteration
        if sample is not None:
            message = f"{message} at sample {sample}"
            if iteration is not None:
                message += f" of iteration {iteration}"
        super().__init__(message)


class DivergenceError(SimulationError):
    """Raised when the closed-loop state stops being finite."""

    def __init__(self, sample: int, iteration: int | None = None):
        self.sample = sample
        self.iteration = iteration
        message = f"Closed-loop state became non-finite at sample {sample}"
        if iteration is not None:
            message += f" of iteration {iteration}"
        super().__init__(message)


class ConfigError(SimulationError):
    """Raised for invalid configuration values or config files."""


class OutputError(SimulationError):
    """Raised when result files cannot be written."""
