"""Process settings and experiment-file loading."""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

from .experiments import ExperimentSpec, builtin_experiments

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class RuntimeSettings:
    """Settings read from the environment (and a local .env file)."""

    out_dir: str
    jobs: int
    log_level: str
    mcp_host: str
    mcp_port: int

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Load settings from environment variables."""
        load_dotenv()
        return cls(
            out_dir=os.environ.get("WHOLEBODY_GRASP_OUT", "results"),
            jobs=_int_env("WHOLEBODY_GRASP_JOBS", 1),
            log_level=os.environ.get("WHOLEBODY_GRASP_LOG_LEVEL", "INFO").upper(),
            mcp_host=os.environ.get("MCP_HOST", "0.0.0.0"),
            mcp_port=_int_env("MCP_PORT", 8000),
        )

    def validate(self) -> list[str]:
        """Validate the settings.

        Returns:
            List of problems, empty when the settings are usable.
        """
        problems = []
        if self.jobs < 1:
            problems.append("WHOLEBODY_GRASP_JOBS must be at least 1")
        if self.log_level not in LOG_LEVELS:
            problems.append(f"WHOLEBODY_GRASP_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")
        if not 0 < self.mcp_port < 65536:
            problems.append("MCP_PORT must be a valid TCP port")
        return problems

    def configure_logging(self) -> None:
        level = self.log_level if self.log_level in LOG_LEVELS else "INFO"
        logging.basicConfig(level=getattr(logging, level))


def _int_env(name: str, default: int) -> int:
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return -1


def load_experiment(source: str | Path) -> ExperimentSpec:
    """Load a builtin experiment by name, or parse and validate a TOML experiment file.

    Raises ``pydantic.ValidationError`` for invalid content and
    ``FileNotFoundError`` for a missing file.
    """
    builtins = builtin_experiments()
    if str(source) in builtins:
        return builtins[str(source)]
    path = Path(source)
    with path.open("rb") as handle:
        data = tomllib.load(handle)
    data.setdefault("name", path.stem)
    return ExperimentSpec.model_validate(data)


def format_validation_errors(error: ValidationError) -> list[str]:
    """One ``path.to.field: message`` line per problem."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return lines
