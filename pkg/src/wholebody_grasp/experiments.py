"""Declarative experiment specs, the builtin experiment families and the sweep runner."""

import contextlib
import json
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__
from .contact import GRAVITY, ContactMode, Manipuland, ShapeKind, vertical_load_capacity
from .controller import GraspController, GraspPolicyConfig, StageBaseline
from .engine import (
    LB,
    TRACE_COLUMNS,
    LoadProtocol,
    OutcomeKind,
    SimConfig,
    build_scene,
    load_test,
    run_grasp,
    trace_row,
)
from .errors import GraspSimError
from .kinematics import ArmParams, BodyFrame, ChestGeometry
from .plots import plot_outcome_grid, plot_trace
from .tactile import ChamberSet

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "run_id", "object_id", "shape", "size", "mode", "pose_index", "pose_angle_deg", "trial",
    "threshold_hpa", "status", "outcome", "empty_weight_kg", "max_weight_held_kg", "max_added_kg",
    "displacement_events", "slip_distance_m", "steps_to_grasp", "final_contacts", "contact_regions",
    "total_normal_force_n", "capacity_n", "collision_stops", "chamber_stops",
]


# ============================================================================
# Experiment schema
# ============================================================================

class ObjectSpec(BaseModel):
    """A manipuland referenced by an experiment."""

    model_config = ConfigDict(frozen=True)

    id: str = Field(description="Object identifier used in result tables")
    shape: ShapeKind
    diameter: float | None = Field(default=None, gt=0.0, description="Circle diameter (m)")
    half_extents: tuple[float, float] | None = Field(default=None, description="Rectangle half extents (m)")
    empty_mass_kg: float = Field(gt=0.0, description="Mass before any weight is added (kg)")
    mu: float = Field(default=0.8, ge=0.0, description="Friction against the robot surfaces")
    taper: float = Field(default=0.0, ge=0.0, description="Cross-section growth per metre of downward slip")

    @model_validator(mode="after")
    def _check_shape(self) -> "ObjectSpec":
        if self.shape is ShapeKind.CIRCLE and self.diameter is None:
            raise ValueError("a circle needs a diameter")
        if self.shape is ShapeKind.RECTANGLE:
            if self.half_extents is None:
                raise ValueError("a rectangle needs half_extents")
            if min(self.half_extents) <= 0.0:
                raise ValueError("half_extents must be positive")
        return self

    @property
    def size_label(self) -> str:
        if self.shape is ShapeKind.CIRCLE:
            return f"{self.diameter * 100:.1f}cm"
        hx, hy = self.half_extents
        return f"{2 * hx * 100:.1f}x{2 * hy * 100:.1f}cm"

    def half_depth(self, angle: float) -> float:
        """Extent of the object towards the chest at ``angle``."""
        if self.shape is ShapeKind.CIRCLE:
            return 0.5 * self.diameter
        hx, hy = self.half_extents
        return abs(hx * math.sin(angle)) + abs(hy * math.cos(angle))

    def build(self, position, angle: float) -> Manipuland:
        common = dict(mass=self.empty_mass_kg, mu=self.mu, taper=self.taper, name=self.id)
        if self.shape is ShapeKind.CIRCLE:
            return Manipuland.circle(0.5 * self.diameter, position, **common)
        return Manipuland.rectangle(self.half_extents, position, angle, **common)


class PoseSpec(BaseModel):
    """Initial object placement: an absolute position, or a gap in front of the chest apex."""

    model_config = ConfigDict(frozen=True)

    position: tuple[float, float] | None = Field(default=None, description="Object centre (m)")
    standoff: float | None = Field(default=None, ge=0.0, description="Gap between chest apex and object (m)")
    angle_deg: float = Field(default=0.0, description="Object orientation (deg)")

    @model_validator(mode="after")
    def _check(self) -> "PoseSpec":
        if (self.position is None) == (self.standoff is None):
            raise ValueError("give exactly one of position or standoff")
        return self

    def place(self, obj: ObjectSpec, chest: ChestGeometry) -> tuple[tuple[float, float], float]:
        angle = math.radians(self.angle_deg)
        if self.position is not None:
            return self.position, angle
        return (0.0, chest.forward_offset + self.standoff + obj.half_depth(angle)), angle


class SceneSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame: BodyFrame = Field(default_factory=BodyFrame)
    arm: ArmParams = Field(default_factory=ArmParams)
    chest: ChestGeometry = Field(default_factory=ChestGeometry)
    chambers: ChamberSet = Field(default_factory=ChamberSet)


class ExperimentSpec(BaseModel):
    """Everything needed to reproduce one experiment family."""

    model_config = ConfigDict(frozen=True)

    name: str
    description: str = ""
    scene: SceneSpec = Field(default_factory=SceneSpec)
    policy: GraspPolicyConfig = Field(default_factory=GraspPolicyConfig)
    sim: SimConfig = Field(default_factory=SimConfig)
    modes: list[ContactMode] = Field(default_factory=lambda: [ContactMode.SOFT], min_length=1)
    objects: list[ObjectSpec] = Field(min_length=1)
    poses: list[PoseSpec] = Field(default_factory=lambda: [PoseSpec(standoff=0.02)], min_length=1)
    trials: int = Field(default=1, ge=1)
    load: LoadProtocol | None = Field(default_factory=LoadProtocol)
    seed: int = 0
    placement_jitter: float = Field(default=0.0, ge=0.0, description="Uniform placement noise per trial (m)")
    sensor_noise_hpa: float = Field(default=0.0, ge=0.0, description="Uniform pressure noise amplitude (hPa)")
    threshold_sweep_hpa: list[float] | None = Field(default=None, description="Uniform thresholds to sweep (hPa)")

    @field_validator("threshold_sweep_hpa")
    @classmethod
    def _positive_thresholds(cls, value):
        if value is not None and (not value or min(value) <= 0.0):
            raise ValueError("threshold sweep needs positive values")
        return value

    @model_validator(mode="after")
    def _unique_ids(self) -> "ExperimentSpec":
        ids = [o.id for o in self.objects]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate object ids: {duplicates}")
        return self


@dataclass(frozen=True)
class RunSpec:
    index: int
    run_id: str
    object_id: str
    pose_index: int
    mode: ContactMode
    trial: int
    threshold_hpa: float | None


def expand_runs(spec: ExperimentSpec) -> list[RunSpec]:
    thresholds = spec.threshold_sweep_hpa or [None]
    runs = []
    for threshold in thresholds:
        for mode in spec.modes:
            for obj in spec.objects:
                for p, _ in enumerate(spec.poses):
                    for trial in range(spec.trials):
                        suffix = "" if threshold is None else f"-th{threshold:g}"
                        run_id = f"{mode.value}-{obj.id}-p{p}-t{trial}{suffix}"
                        runs.append(RunSpec(len(runs), run_id, obj.id, p, mode, trial, threshold))
    return runs


# ============================================================================
# Builtin experiments
# ============================================================================

POT_DIAMETERS = {"pot-A": 0.114, "pot-B": 0.172, "pot-C": 0.229, "pot-D": 0.311}
POT_EMPTY_LB = {"pot-A": 0.9, "pot-B": 0.7, "pot-C": 2.6, "pot-D": 4.3}
# Every pot sits at the same spot on the table; the straight-walled pots do not wedge when they slip.
POT_POSE = PoseSpec(position=(0.0, 0.75))
# Arms open wide with the wrists cocked in, so the forearms and paws close around the pot together.
POT_PREGRASP = (0.4, -1.0, 0.8)
# Rigid links under the fabric cover give about a millimetre at 10 N.
POT_K_HARD = 1.0e4


def _pots(ids=None) -> list[ObjectSpec]:
    return [
        ObjectSpec(id=key, shape=ShapeKind.CIRCLE, diameter=d, empty_mass_kg=POT_EMPTY_LB[key] * LB)
        for key, d in POT_DIAMETERS.items()
        if ids is None or key in ids
    ]


def builtin_experiments() -> dict[str, ExperimentSpec]:
    staged = GraspPolicyConfig(baseline=StageBaseline.STAGE)
    pot_policy = GraspPolicyConfig(baseline=StageBaseline.STAGE, pregrasp_q=POT_PREGRASP)
    pot_sim = SimConfig(k_hard=POT_K_HARD)
    return {
        "pots-soft-vs-hard": ExperimentSpec(
            name="pots-soft-vs-hard",
            description="Four pots of increasing diameter, soft and hard bodies, weights added in 1 lb steps",
            policy=pot_policy,
            sim=pot_sim,
            modes=[ContactMode.SOFT, ContactMode.HARD],
            objects=_pots(),
            poses=[POT_POSE],
            trials=3,
        ),
        "hamper-poses": ExperimentSpec(
            name="hamper-poses",
            description="Laundry hamper grasped from two initial orientations",
            policy=staged,
            objects=[ObjectSpec(id="hamper", shape=ShapeKind.RECTANGLE, half_extents=(0.16, 0.16),
                                empty_mass_kg=0.8)],
            poses=[PoseSpec(position=(0.0, 0.55), angle_deg=0.0), PoseSpec(position=(0.0, 0.55), angle_deg=45.0)],
            load=LoadProtocol(max_added_kg=0.0),
        ),
        "pot-thresholds": ExperimentSpec(
            name="pot-thresholds",
            description="Pot C grasped with increasing pressure thresholds",
            policy=pot_policy,
            sim=pot_sim,
            objects=_pots({"pot-C"}),
            poses=[POT_POSE],
            threshold_sweep_hpa=[10.0, 20.0, 40.0],
        ),
        "hug": ExperimentSpec(
            name="hug",
            description="Gentle low-threshold enveloping grasp of a torso-sized cylinder, no load",
            policy=GraspPolicyConfig(pressure_thresholds=(5.0, 5.0, 5.0, 5.0), baseline=StageBaseline.STAGE),
            objects=[ObjectSpec(id="torso", shape=ShapeKind.CIRCLE, diameter=0.30, empty_mass_kg=30.0)],
            poses=[PoseSpec(position=(0.0, 0.45))],
            load=None,
        ),
    }


# ============================================================================
# Running
# ============================================================================

@dataclass
class RunResult:
    run: RunSpec
    summary: dict
    trace: pd.DataFrame | None
    error: str | None = None


def run_seed(spec: ExperimentSpec, run: RunSpec) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=spec.seed, spawn_key=(run.index,))


def simulate_run(spec: ExperimentSpec, run: RunSpec) -> RunResult:
    """Grasp, then (if the grasp completed and a protocol is set) load test, for one run."""
    obj_spec = next(o for o in spec.objects if o.id == run.object_id)
    pose = spec.poses[run.pose_index]
    policy = spec.policy if run.threshold_hpa is None else spec.policy.with_uniform_threshold(run.threshold_hpa)
    rng = np.random.default_rng(run_seed(spec, run))
    sim = spec.sim.model_copy(update={"mode": run.mode, "seed": int(run_seed(spec, run).generate_state(1)[0])})

    position, angle = pose.place(obj_spec, spec.scene.chest)
    if spec.placement_jitter > 0.0:
        position = tuple(np.asarray(position) + rng.uniform(-spec.placement_jitter, spec.placement_jitter, 2))
    manipuland = obj_spec.build(position, angle)

    summary = {
        "run_id": run.run_id, "object_id": obj_spec.id, "shape": obj_spec.shape.value,
        "size": obj_spec.size_label, "mode": run.mode.value, "pose_index": run.pose_index,
        "pose_angle_deg": pose.angle_deg, "trial": run.trial,
        "threshold_hpa": run.threshold_hpa if run.threshold_hpa is not None else policy.pressure_thresholds[0],
        "empty_weight_kg": obj_spec.empty_mass_kg,
    }
    try:
        scene = build_scene(spec.scene.frame, spec.scene.arm, spec.scene.chest, spec.scene.chambers, run.mode,
                            policy.pregrasp_q, manipuland=manipuland, k_hard=sim.k_hard)
        trace = run_grasp(scene, GraspController(policy), sim, spec.sensor_noise_hpa, rng)
        rows = list(trace.rows)
        final = trace.settlement

        outcome = None
        if trace.grasped and spec.load is not None:
            outcome, steps = load_test(trace.scene, final, obj_spec.empty_mass_kg, spec.load, sim)
            reading = trace.scene.pressures(final.contacts)
            zero = np.zeros(3)
            t_end = rows[-1][0]
            for k, step in enumerate(steps, start=1):
                rows.append(trace_row(t_end + k * sim.dt_control, policy.stage_count, trace.scene, zero, zero,
                                      reading, final.contacts, step.mass * GRAVITY, step.slip, step.capacity))
    except GraspSimError as exc:
        logger.error(f"run {run.run_id} invalid: {exc}")
        summary.update(status="invalid", outcome="")
        return RunResult(run, _complete(summary), None, str(exc))

    if not trace.grasped:
        kind, held, added, slip, events = OutcomeKind.FAILURE, 0.0, 0.0, 0.0, 0
    elif outcome is None:
        kind, held, added, slip, events = OutcomeKind.SUCCESS, 0.0, 0.0, 0.0, 0
    else:
        kind, held, added = outcome.kind, outcome.max_weight_held, outcome.max_added
        slip, events = outcome.slip_distance, outcome.displacement_events

    summary.update(
        status=trace.status.value,
        outcome=kind.value,
        max_weight_held_kg=held,
        max_added_kg=added,
        displacement_events=events,
        slip_distance_m=slip,
        steps_to_grasp=trace.steps_to_grasp if trace.steps_to_grasp is not None else -1,
        final_contacts=len(final.contacts),
        contact_regions=final.contacts.independent_regions(),
        total_normal_force_n=final.contacts.total_normal_force,
        capacity_n=vertical_load_capacity(final.contacts),
        collision_stops=trace.monitor.collision_stops,
        chamber_stops=trace.monitor.chamber_stops,
    )
    logger.info(f"run {run.run_id}: {trace.status.value}, {kind.value}")
    return RunResult(run, _complete(summary), pd.DataFrame(rows, columns=TRACE_COLUMNS))


def _complete(summary: dict) -> dict:
    return {column: summary.get(column, "") for column in SUMMARY_COLUMNS}


def _execute(args: tuple[ExperimentSpec, RunSpec]) -> RunResult:
    return simulate_run(*args)


@dataclass
class ExperimentResult:
    out_dir: Path
    summary: pd.DataFrame
    manifest: dict

    @property
    def invalid_runs(self) -> list[str]:
        return [r["run_id"] for r in self.manifest["runs"] if r["status"] == "invalid"]


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")


def run_experiment(spec: ExperimentSpec, out_dir: str | Path, jobs: int = 1, seed: int | None = None,
                   mode: ContactMode | None = None) -> ExperimentResult:
    """Execute every run of ``spec`` and write summary, traces, manifest and plots under ``out_dir``."""
    if seed is not None:
        spec = spec.model_copy(update={"seed": seed})
    if mode is not None:
        if mode not in spec.modes:
            raise GraspSimError(f"experiment {spec.name} has no {mode.value} runs")
        spec = spec.model_copy(update={"modes": [mode]})

    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(spec.model_dump_json(indent=2) + "\n")

    runs = expand_runs(spec)
    logger.info(f"experiment {spec.name}: {len(runs)} runs on {jobs} worker(s)")
    manifest = {
        "experiment": spec.name,
        "version": __version__,
        "seed": spec.seed,
        "run_count": len(runs),
        "complete": False,
        "runs": [],
    }
    _write_manifest(manifest, out)

    rows = []
    work = [(spec, run) for run in runs]
    with contextlib.ExitStack() as stack:
        if jobs > 1:
            results = stack.enter_context(Pool(jobs)).imap(_execute, work)
        else:
            results = map(_execute, work)
        for result in results:
            manifest["runs"].append(_write_run(result, out))
            rows.append(result.summary)
            # partial results stay readable if the sweep is interrupted
            write_csv(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), out / "summary.csv")
            _write_manifest(manifest, out)

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    plot_outcome_grid(summary, out / "plots" / "outcomes.svg")
    invalid = sum(e["status"] == "invalid" for e in manifest["runs"])
    manifest["complete"] = invalid == 0
    _write_manifest(manifest, out)
    if invalid:
        logger.warning(f"experiment {spec.name}: {invalid} invalid run(s)")
    return ExperimentResult(out, summary, manifest)


def _write_run(result: RunResult, out: Path) -> dict:
    """Trace CSV and plot of one finished run; invalid runs get a header-only trace."""
    trace_path = out / "traces" / f"{result.run.run_id}.csv"
    if result.trace is None:
        write_csv(pd.DataFrame(columns=TRACE_COLUMNS), trace_path)
    else:
        write_csv(result.trace, trace_path)
        plot_trace(result.trace, out / "plots" / f"{result.run.run_id}.svg", title=result.run.run_id)
    entry = {"run_id": result.run.run_id, "status": result.summary["status"], "trace": f"traces/{trace_path.name}"}
    if result.error:
        entry["error"] = result.error
    return entry


def _write_manifest(manifest: dict, out: Path) -> None:
    path = out / "manifest.json"
    staging = path.with_suffix(".json.tmp")
    staging.write_text(json.dumps(manifest, indent=2) + "\n")
    staging.replace(path)
