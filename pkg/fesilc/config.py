"""Config file parsing and layering of defaults, file values and flags."""

import logging
from collections.abc import Callable, Mapping
from dataclasses import fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from .diagnostics import ConfigError, ModelError
from .models import (
    IlcInjection,
    QFilterMode,
    ReferenceProfile,
    Scenario,
    ScenarioConfig,
)

logger = logging.getLogger(__name__)

# Nested parameter records addressable as "<section>.<field>"
SECTIONS = ("arm", "muscle", "plant", "lead", "fes")

# Keys fixed to the published values in paper-faithful mode
LOCKED_KEYS = frozenset(
    {
        "ts",
        "duration",
        "start_x",
        "start_y",
        "end_x",
        "end_y",
        "profile",
        "q_cutoff_hz",
    }
)

# Written first by format_config, in this order
_LEADING_KEYS = frozenset(
    {"scenario", "iterations", "ts", "duration", "start_x", "start_y", "end_x", "end_y"}
)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in {"", "none", "auto"} else float(text)


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in {"", "none", "auto"} else int(text)


def _enum(kind: type[Enum]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        value = text.strip().lower().replace("-", "_")
        try:
            return kind(value)
        except ValueError:
            choices = ", ".join(str(m.value) for m in kind)
            raise ValueError(f"expected one of {choices}, got '{text}'") from None

    return parse


# Top-level keys and the parser for their values
TOP_LEVEL_KEYS: dict[str, Callable[[str], Any]] = {
    "scenario": lambda text: Scenario(int(text)),
    "iterations": _optional_int,
    "ts": float,
    "duration": float,
    "start_x": float,
    "start_y": float,
    "end_x": float,
    "end_y": float,
    "profile": _enum(ReferenceProfile),
    "learning_gain": float,
    "q_cutoff_hz": float,
    "q_mode": _enum(QFilterMode),
    "learning_lead": float,
    "injection": _enum(IlcInjection),
    "psi": float,
    "r_dot_max": _optional_float,
    "r_dot_min": float,
    "v0": _optional_float,
    "constraint_margin": float,
    "strict_bound": _parse_bool,
}


def _section_fields(cfg: ScenarioConfig, section: str) -> set[str]:
    return {f.name for f in fields(getattr(cfg, section))}


def known_keys() -> list[str]:
    """All keys accepted in a config file."""
    defaults = ScenarioConfig()
    keys = list(TOP_LEVEL_KEYS)
    for section in SECTIONS:
        names = sorted(_section_fields(defaults, section))
        keys.extend(f"{section}.{name}" for name in names)
    return keys


def is_model_key(key: str) -> bool:
    """Whether a key alters model parameters locked by paper-faithful mode."""
    return key in LOCKED_KEYS or key.split(".", 1)[0] in SECTIONS


def parse_value(key: str, text: str) -> Any:
    """Convert the text of a config value to the type its key expects."""
    if key in TOP_LEVEL_KEYS:
        return TOP_LEVEL_KEYS[key](text)
    section, _, name = key.partition(".")
    if section in SECTIONS and name in _section_fields(ScenarioConfig(), section):
        return float(text)
    raise ConfigError(f"Unknown config key '{key}'")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """
    Parse flat ``key = value`` text.

    Args:
        text: Config file contents
        source: Name used in error messages

    Returns:
        Mapping of key to typed value, in file order.

    Raises:
        ConfigError: On malformed lines, unknown keys or bad values.
    """
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        try:
            values[key] = parse_value(key, value.strip())
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(
                f"{source}:{lineno}: invalid value for {key}: {exc}"
            ) from None
    return values


def load_config_file(path: Path) -> dict[str, Any]:
    """Read and parse a config file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc.strerror}") from exc
    values = parse_config_text(text, source=str(path))
    logger.info("Loaded %d setting(s) from %s", len(values), path)
    return values


def apply_overrides(cfg: ScenarioConfig, values: Mapping[str, Any]) -> ScenarioConfig:
    """Return ``cfg`` with the given key/value overrides applied."""
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {}
    start = list(cfg.start)
    end = list(cfg.end)
    for key, value in values.items():
        if key in ("start_x", "start_y"):
            start[1 if key == "start_y" else 0] = value
        elif key in ("end_x", "end_y"):
            end[1 if key == "end_y" else 0] = value
        elif key in TOP_LEVEL_KEYS:
            top[key] = value
        else:
            section, _, name = key.partition(".")
            if section not in SECTIONS:
                raise ConfigError(f"Unknown config key '{key}'")
            nested.setdefault(section, {})[name] = value
    top["start"] = (float(start[0]), float(start[1]))
    top["end"] = (float(end[0]), float(end[1]))
    try:
        for section, changes in nested.items():
            top[section] = replace(getattr(cfg, section), **changes)
        return replace(cfg, **top)
    except (TypeError, ModelError) as exc:
        raise ConfigError(str(exc)) from exc


def build_config(
    file_values: Mapping[str, Any] | None = None,
    flag_values: Mapping[str, Any] | None = None,
    paper_faithful: bool = False,
) -> ScenarioConfig:
    """
    Layer flags over config-file values over built-in defaults.

    Raises:
        ConfigError: If paper-faithful mode meets a model-parameter key, or
            the merged values are invalid.
    """
    file_values = dict(file_values or {})
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None}
    if paper_faithful:
        locked = sorted(k for k in {**file_values, **flag_values} if is_model_key(k))
        if locked:
            raise ConfigError(
                "Paper-faithful mode fixes model parameters; remove: "
                + ", ".join(locked)
            )
    merged = {**file_values, **flag_values}
    return apply_overrides(ScenarioConfig(paper_faithful=paper_faithful), merged)


def format_config(cfg: ScenarioConfig) -> str:
    """Render ``cfg`` as config-file text that :func:`parse_config_text` accepts."""

    def fmt(value: Any) -> str:
        if value is None:
            return "none"
        if isinstance(value, Enum):
            return str(value.value)
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    lines = [
        f"scenario = {cfg.scenario.value}",
        f"iterations = {cfg.trial_count}",
        f"ts = {fmt(cfg.ts)}",
        f"duration = {fmt(cfg.duration)}",
        f"start_x = {fmt(cfg.start[0])}",
        f"start_y = {fmt(cfg.start[1])}",
        f"end_x = {fmt(cfg.end[0])}",
        f"end_y = {fmt(cfg.end[1])}",
    ]
    for key in TOP_LEVEL_KEYS:
        if key in _LEADING_KEYS:
            continue
        lines.append(f"{key} = {fmt(getattr(cfg, key))}")
    for section in SECTIONS:
        record = getattr(cfg, section)
        for f in fields(record):
            lines.append(f"{section}.{f.name} = {fmt(getattr(record, f.name))}")
    return "\n".join(lines) + "\n"
