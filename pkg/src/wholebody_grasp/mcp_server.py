"""
Grasp Simulator MCP Server

Exposes the experiment runner and the comparison report as MCP tools so an
agent can list, validate and run grasp experiments and read their results.
Served over stdio (``stdio_server``) or streamable HTTP (``local_mcp_server``).
"""

import asyncio
import json
import logging
from pathlib import Path
from typing import Any

from mcp.server import Server
from mcp.types import TextContent, Tool
from pydantic import ValidationError

from .config import RuntimeSettings, format_validation_errors, load_experiment
from .contact import ContactMode
from .experiments import builtin_experiments, expand_runs, run_experiment
from .report import compare_report

logger = logging.getLogger(__name__)


# ============================================================================
# Tool implementations
# ============================================================================

def load_serving_settings() -> RuntimeSettings:
    """Environment settings for a long-running server.

    Unlike the CLI, which only warns, a server refuses to start on invalid
    settings (exit code 2). The results root is created up front.
    """
    settings = RuntimeSettings.from_env()
    settings.configure_logging()
    problems = settings.validate()
    if problems:
        for problem in problems:
            logger.error(problem)
        raise SystemExit(2)
    Path(settings.out_dir).mkdir(parents=True, exist_ok=True)
    return settings


def describe_builtins() -> list[dict[str, Any]]:
    return [
        {
            "name": name,
            "description": spec.description,
            "modes": [m.value for m in spec.modes],
            "objects": [o.id for o in spec.objects],
            "runs": len(expand_runs(spec)),
        }
        for name, spec in builtin_experiments().items()
    ]


def validate_source(source: str) -> dict[str, Any]:
    try:
        spec = load_experiment(source)
    except ValidationError as e:
        return {"valid": False, "errors": format_validation_errors(e)}
    return {"valid": True, "name": spec.name, "runs": len(expand_runs(spec))}


def execute(source: str, out_dir: str, jobs: int, seed: int | None, mode: str | None) -> dict[str, Any]:
    spec = load_experiment(source)
    result = run_experiment(spec, out_dir, jobs=jobs, seed=seed,
                            mode=ContactMode(mode) if mode else None)
    outcomes = result.summary["outcome"].value_counts().to_dict()
    return {
        "experiment": spec.name,
        "out_dir": str(result.out_dir),
        "complete": result.manifest["complete"],
        "run_count": result.manifest["run_count"],
        "invalid_runs": result.invalid_runs,
        "outcomes": {str(k) or "invalid": int(v) for k, v in outcomes.items()},
    }


def compare(paths: list[str]) -> dict[str, Any]:
    report = compare_report([Path(p) for p in paths])
    return {"flags": report.flags, "markdown": report.markdown}


# ============================================================================
# MCP Server
# ============================================================================

def create_mcp_server(settings: RuntimeSettings | None = None) -> Server:
    """Create and configure the MCP server with the simulator tools."""

    settings = settings or RuntimeSettings.from_env()
    server = Server("wholebody-grasp")

    @server.list_tools()
    async def list_tools() -> list[Tool]:
        """List available MCP tools."""
        return [
            Tool(
                name="list_builtin_experiments",
                description="List the builtin grasp experiments with their objects, modes and run counts.",
                inputSchema={"type": "object", "properties": {}},
            ),
            Tool(
                name="validate_experiment",
                description="Validate a builtin experiment name or a TOML experiment file path.",
                inputSchema={
                    "type": "object",
                    "properties": {
                        "experiment": {"type": "string", "description": "Builtin name or path to a .toml file"},
                    },
                    "required": ["experiment"],
                },
            ),
            Tool(
                name="run_experiment",
                description="""Run every grasp of an experiment and write summary.csv, traces, plots and manifest.json.

Returns the outcome counts and any runs that ended invalid.""",
                inputSchema={
                    "type": "object",
                    "properties": {
                        "experiment": {"type": "string", "description": "Builtin name or path to a .toml file"},
                        "out_dir": {"type": "string", "description": "Output directory (defaults to WHOLEBODY_GRASP_OUT/<name>)"},
                        "jobs": {"type": "integer", "minimum": 1, "description": "Worker processes"},
                        "seed": {"type": "integer", "description": "Override the experiment seed"},
                        "mode": {"type": "string", "enum": [m.value for m in ContactMode]},
                    },
                    "required": ["experiment"],
                },
            ),
            Tool(
                name="compare_reports",
                description="Compare one or more result directories (or summary.csv files) per object and mode.",
                inputSchema={
                    "type": "object",
                    "properties": {
                        "paths": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    },
                    "required": ["paths"],
                },
            ),
        ]

    @server.call_tool()
    async def call_tool(name: str, arguments: dict[str, Any]) -> list[TextContent]:
        """Handle tool invocations."""

        try:
            if name == "list_builtin_experiments":
                payload: Any = describe_builtins()

            elif name == "validate_experiment":
                experiment = arguments.get("experiment")
                if not experiment:
                    return [TextContent(type="text", text="Error: experiment is required")]
                payload = validate_source(experiment)

            elif name == "run_experiment":
                experiment = arguments.get("experiment")
                if not experiment:
                    return [TextContent(type="text", text="Error: experiment is required")]
                out_dir = arguments.get("out_dir") or str(Path(settings.out_dir) / Path(experiment).stem)
                logger.info(f"Running experiment {experiment} into {out_dir}")
                # the simulation is CPU bound; keep the event loop responsive
                payload = await asyncio.to_thread(
                    execute, experiment, out_dir, int(arguments.get("jobs") or settings.jobs),
                    arguments.get("seed"), arguments.get("mode"),
                )

            elif name == "compare_reports":
                paths = arguments.get("paths") or []
                if not paths:
                    return [TextContent(type="text", text="Error: paths is required")]
                payload = compare(paths)

            else:
                return [TextContent(type="text", text=f"Unknown tool: {name}")]

        except ValidationError as e:
            return [TextContent(type="text", text="Error: " + "; ".join(format_validation_errors(e)))]
        except Exception as e:
            logger.error(f"Error in tool {name}: {e}")
            return [TextContent(type="text", text=f"Error: {str(e)}")]

        return [TextContent(type="text", text=json.dumps(payload, indent=2))]

    return server
