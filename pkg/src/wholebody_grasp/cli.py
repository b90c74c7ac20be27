"""Command line: run, validate and compare grasp experiments."""

import logging
from pathlib import Path
from typing import Annotated, Optional

import typer
from pydantic import ValidationError

from .config import RuntimeSettings, format_validation_errors, load_experiment
from .contact import ContactMode
from .errors import GraspSimError, NonConvergenceError, SchemaMismatchError
from .experiments import builtin_experiments, expand_runs, run_experiment
from .report import compare_report

logger = logging.getLogger(__name__)

app = typer.Typer(help="Planar whole-body grasp simulator.", no_args_is_help=True, add_completion=False)


def _settings() -> RuntimeSettings:
    settings = RuntimeSettings.from_env()
    settings.configure_logging()
    for problem in settings.validate():
        logger.warning(problem)
    return settings


def _load(source: str):
    try:
        return load_experiment(source)
    except ValidationError as e:
        for line in format_validation_errors(e):
            typer.echo(line, err=True)
        logger.error(f"{source}: {e.error_count()} validation error(s)")
        raise typer.Exit(code=2)
    except (FileNotFoundError, ValueError) as e:
        # ValueError covers TOML syntax errors
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=2)


@app.command()
def run(
    spec: Annotated[str, typer.Argument(help="Builtin experiment name or TOML file")],
    out: Annotated[Optional[Path], typer.Option("--out", help="Output directory")] = None,
    jobs: Annotated[Optional[int], typer.Option("--jobs", min=1, help="Worker processes")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="Override the experiment seed")] = None,
    mode: Annotated[Optional[ContactMode], typer.Option("--mode", help="Only run this contact mode")] = None,
):
    """Run every trial of an experiment and write its results."""
    settings = _settings()
    experiment = _load(spec)
    out_dir = out or Path(settings.out_dir) / experiment.name
    try:
        result = run_experiment(experiment, out_dir, jobs=jobs or settings.jobs, seed=seed, mode=mode)
    except NonConvergenceError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=3)
    except GraspSimError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=2)

    counts = result.summary["outcome"].replace("", "invalid").value_counts()
    typer.echo(f"{experiment.name}: {len(result.summary)} runs written to {result.out_dir}")
    for outcome, count in counts.items():
        typer.echo(f"  {outcome}: {count}")
    if result.invalid_runs:
        typer.echo(f"{len(result.invalid_runs)} invalid run(s): {', '.join(result.invalid_runs)}", err=True)
        raise typer.Exit(code=3)


@app.command()
def report(
    dirs: Annotated[list[Path], typer.Argument(help="Result directories or summary.csv files")],
    out: Annotated[Optional[Path], typer.Option("--out", help="Write report.md and report.csv here")] = None,
):
    """Compare experiment summaries per object and mode."""
    _settings()
    try:
        result = compare_report(dirs)
    except (SchemaMismatchError, FileNotFoundError) as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=2)
    typer.echo(result.markdown)
    if out is not None:
        typer.echo(f"written {result.write(out)}")


@app.command()
def validate(spec: Annotated[str, typer.Argument(help="Builtin experiment name or TOML file")]):
    """Check an experiment file without running it."""
    _settings()
    experiment = _load(spec)
    typer.echo(f"{experiment.name}: valid, {len(expand_runs(experiment))} runs")


@app.command("list-builtin")
def list_builtin():
    """List the builtin experiments."""
    for name, spec in builtin_experiments().items():
        typer.echo(f"{name}\t{len(expand_runs(spec))} runs\t{spec.description}")


if __name__ == "__main__":
    app()
