import json
import math
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from wholebody_grasp import engine, experiments
from wholebody_grasp.config import load_experiment
from wholebody_grasp.contact import ContactMode, ShapeKind
from wholebody_grasp.engine import LB, TRACE_COLUMNS, SimConfig
from wholebody_grasp.errors import GraspSimError, NonConvergenceError
from wholebody_grasp.experiments import (
    SUMMARY_COLUMNS,
    ExperimentSpec,
    ObjectSpec,
    PoseSpec,
    builtin_experiments,
    expand_runs,
    run_experiment,
    run_seed,
)
from wholebody_grasp.kinematics import ChestGeometry
from wholebody_grasp.report import compare_report


def small_pot(**overrides):
    fields = dict(id="pot", shape=ShapeKind.CIRCLE, diameter=0.1, empty_mass_kg=0.5)
    fields.update(overrides)
    return ObjectSpec(**fields)


def out_of_reach(**overrides):
    """Both modes, one pot far beyond the arms, a short timeout."""
    fields = dict(
        name="out-of-reach",
        modes=[ContactMode.SOFT, ContactMode.HARD],
        objects=[small_pot()],
        poses=[PoseSpec(position=(0.0, 2.0))],
        sim=SimConfig(timeout=0.2),
        load=None,
        seed=7,
    )
    fields.update(overrides)
    return ExperimentSpec(**fields)


# ============================================================================
# Schema
# ============================================================================

def test_circle_needs_diameter():
    with pytest.raises(ValidationError, match="diameter"):
        ObjectSpec(id="x", shape=ShapeKind.CIRCLE, empty_mass_kg=1.0)


def test_rectangle_needs_positive_half_extents():
    with pytest.raises(ValidationError, match="half_extents"):
        ObjectSpec(id="x", shape=ShapeKind.RECTANGLE, empty_mass_kg=1.0)
    with pytest.raises(ValidationError, match="positive"):
        ObjectSpec(id="x", shape=ShapeKind.RECTANGLE, half_extents=(0.1, 0.0), empty_mass_kg=1.0)


def test_empty_mass_must_be_positive():
    with pytest.raises(ValidationError) as info:
        small_pot(empty_mass_kg=0.0)
    assert info.value.errors()[0]["loc"] == ("empty_mass_kg",)


def test_size_labels():
    assert small_pot(diameter=0.172).size_label == "17.2cm"
    box = ObjectSpec(id="box", shape=ShapeKind.RECTANGLE, half_extents=(0.18, 0.075), empty_mass_kg=1.0)
    assert box.size_label == "36.0x15.0cm"


def test_half_depth_follows_orientation():
    box = ObjectSpec(id="box", shape=ShapeKind.RECTANGLE, half_extents=(0.18, 0.075), empty_mass_kg=1.0)
    assert box.half_depth(0.0) == pytest.approx(0.075)
    assert box.half_depth(math.pi / 2) == pytest.approx(0.18)
    assert box.half_depth(math.pi / 4) == pytest.approx((0.18 + 0.075) / math.sqrt(2))
    assert small_pot().half_depth(1.0) == pytest.approx(0.05)


def test_pose_needs_exactly_one_placement():
    with pytest.raises(ValidationError, match="exactly one"):
        PoseSpec()
    with pytest.raises(ValidationError, match="exactly one"):
        PoseSpec(position=(0.0, 0.4), standoff=0.02)


def test_standoff_places_object_in_front_of_chest():
    chest = ChestGeometry()
    position, angle = PoseSpec(standoff=0.02).place(small_pot(), chest)
    assert angle == 0.0
    assert position == pytest.approx((0.0, chest.forward_offset + 0.02 + 0.05))

    position, angle = PoseSpec(position=(0.01, 0.4), angle_deg=90.0).place(small_pot(), chest)
    assert position == (0.01, 0.4)
    assert angle == pytest.approx(math.pi / 2)


def test_duplicate_object_ids_rejected():
    with pytest.raises(ValidationError, match="duplicate object ids"):
        ExperimentSpec(name="dup", objects=[small_pot(), small_pot(diameter=0.2)])


def test_experiment_needs_objects_and_modes():
    with pytest.raises(ValidationError):
        ExperimentSpec(name="empty", objects=[])
    with pytest.raises(ValidationError):
        ExperimentSpec(name="no-modes", objects=[small_pot()], modes=[])


def test_threshold_sweep_must_be_positive():
    with pytest.raises(ValidationError, match="positive"):
        ExperimentSpec(name="bad", objects=[small_pot()], threshold_sweep_hpa=[10.0, 0.0])
    with pytest.raises(ValidationError, match="positive"):
        ExperimentSpec(name="bad", objects=[small_pot()], threshold_sweep_hpa=[])


# ============================================================================
# Expansion and builtins
# ============================================================================

def test_expand_runs_covers_every_combination():
    spec = ExperimentSpec(
        name="grid",
        modes=[ContactMode.SOFT, ContactMode.HARD],
        objects=[small_pot(), small_pot(id="pot-2", diameter=0.2)],
        poses=[PoseSpec(standoff=0.02), PoseSpec(standoff=0.04)],
        trials=3,
    )
    runs = expand_runs(spec)
    assert len(runs) == 2 * 2 * 2 * 3
    assert [r.index for r in runs] == list(range(len(runs)))
    assert len({r.run_id for r in runs}) == len(runs)
    assert runs[0].run_id == "soft-pot-p0-t0"
    assert all(r.threshold_hpa is None for r in runs)


def test_threshold_sweep_multiplies_runs():
    spec = ExperimentSpec(name="sweep", objects=[small_pot()], threshold_sweep_hpa=[10.0, 40.0])
    runs = expand_runs(spec)
    assert [r.threshold_hpa for r in runs] == [10.0, 40.0]
    assert runs[1].run_id == "soft-pot-p0-t0-th40"


def test_builtin_pot_family():
    spec = builtin_experiments()["pots-soft-vs-hard"]
    assert len(expand_runs(spec)) == 24
    diameters = {o.id: o.diameter for o in spec.objects}
    assert diameters == {"pot-A": 0.114, "pot-B": 0.172, "pot-C": 0.229, "pot-D": 0.311}
    masses = {o.id: o.empty_mass_kg for o in spec.objects}
    assert masses["pot-D"] == pytest.approx(4.3 * LB)
    assert spec.load.added_masses()[-1] == pytest.approx(5 * LB)


def test_other_builtins_run_counts():
    builtins = builtin_experiments()
    assert len(expand_runs(builtins["hamper-poses"])) == 2
    assert [p.angle_deg for p in builtins["hamper-poses"].poses] == [0.0, 45.0]
    assert len(expand_runs(builtins["pot-thresholds"])) == 3
    assert builtins["hug"].load is None


def test_builtins_survive_a_dump_and_reload():
    for spec in builtin_experiments().values():
        assert ExperimentSpec.model_validate_json(spec.model_dump_json()) == spec


def test_run_seed_depends_on_seed_and_index():
    spec = out_of_reach()
    first, second = expand_runs(spec)
    state = run_seed(spec, first).generate_state(4)
    np.testing.assert_array_equal(state, run_seed(spec, first).generate_state(4))
    assert not np.array_equal(state, run_seed(spec, second).generate_state(4))
    reseeded = spec.model_copy(update={"seed": 8})
    assert not np.array_equal(state, run_seed(reseeded, first).generate_state(4))


# ============================================================================
# Running
# ============================================================================

def test_run_experiment_writes_results(tmp_path):
    result = run_experiment(out_of_reach(), tmp_path / "run")
    out = tmp_path / "run"

    assert result.manifest["complete"] is True
    assert result.manifest["run_count"] == 2
    assert result.invalid_runs == []

    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == SUMMARY_COLUMNS
    assert list(summary["status"]) == ["timeout", "timeout"]
    assert list(summary["outcome"]) == ["failure", "failure"]
    assert list(summary["steps_to_grasp"]) == [-1, -1]
    assert list(summary["final_contacts"]) == [0, 0]

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "out-of-reach"
    assert manifest["seed"] == 7
    for entry in manifest["runs"]:
        trace = pd.read_csv(out / entry["trace"])
        assert len(trace) == 21
        assert (out / "plots" / f"{entry['run_id']}.svg").exists()
    assert (out / "plots" / "outcomes.svg").exists()
    resolved = ExperimentSpec.model_validate_json((out / "resolved_config.json").read_text())
    assert resolved == out_of_reach()


def test_run_experiment_is_reproducible(tmp_path):
    spec = out_of_reach(modes=[ContactMode.SOFT], sensor_noise_hpa=0.5, placement_jitter=0.01)
    run_experiment(spec, tmp_path / "a")
    run_experiment(spec, tmp_path / "b")
    for name in ("summary.csv", "traces/soft-pot-p0-t0.csv", "plots/outcomes.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_is_recorded(tmp_path):
    result = run_experiment(out_of_reach(modes=[ContactMode.SOFT]), tmp_path, seed=99)
    assert result.manifest["seed"] == 99


def test_mode_filter(tmp_path):
    result = run_experiment(out_of_reach(), tmp_path, mode=ContactMode.HARD)
    assert list(result.summary["mode"]) == ["hard"]
    with pytest.raises(GraspSimError, match="no hard runs"):
        run_experiment(out_of_reach(modes=[ContactMode.SOFT]), tmp_path, mode=ContactMode.HARD)


@pytest.mark.slow
def test_parallel_matches_serial(tmp_path):
    spec = out_of_reach(sensor_noise_hpa=0.5)
    run_experiment(spec, tmp_path / "serial", jobs=1)
    run_experiment(spec, tmp_path / "parallel", jobs=2)
    assert (tmp_path / "serial" / "summary.csv").read_bytes() == (tmp_path / "parallel" / "summary.csv").read_bytes()


def test_sample_experiment_files_validate():
    samples = sorted((Path(__file__).parent.parent / "experiments").glob("*.toml"))
    assert samples
    for path in samples:
        spec = load_experiment(path)
        assert spec.name == path.stem
        assert expand_runs(spec)


def test_pot_sample_matches_builtin():
    sample = load_experiment(Path(__file__).parent.parent / "experiments" / "pots-soft-vs-hard.toml")
    builtin = builtin_experiments()["pots-soft-vs-hard"]
    assert [(r.run_id, r.mode) for r in expand_runs(sample)] == [(r.run_id, r.mode) for r in expand_runs(builtin)]
    for ours, theirs in zip(sample.objects, builtin.objects):
        assert ours.diameter == theirs.diameter
        assert ours.empty_mass_kg == pytest.approx(theirs.empty_mass_kg)
        assert ours.taper == theirs.taper
    assert sample.poses == builtin.poses
    assert sample.policy.pregrasp_q == builtin.policy.pregrasp_q
    assert sample.sim.k_hard == builtin.sim.k_hard
    assert sample.placement_jitter == builtin.placement_jitter


def test_invalid_run_gets_header_only_trace(tmp_path, monkeypatch):
    def stalled(*args, **kwargs):
        raise NonConvergenceError(1.2e-4, 0.0, 7)

    monkeypatch.setattr(experiments, "run_grasp", stalled)
    result = run_experiment(out_of_reach(modes=[ContactMode.SOFT]), tmp_path)

    assert result.invalid_runs == ["soft-pot-p0-t0"]
    assert result.manifest["complete"] is False
    entry = result.manifest["runs"][0]
    assert "equilibrium not reached" in entry["error"]
    trace = pd.read_csv(tmp_path / entry["trace"])
    assert list(trace.columns) == list(TRACE_COLUMNS)
    assert trace.empty


def test_results_are_written_as_runs_finish(tmp_path, monkeypatch):
    real = experiments.simulate_run
    seen = []

    def interrupted(spec, run):
        if run.index == 1:
            manifest = json.loads((tmp_path / "manifest.json").read_text())
            seen.append(manifest)
            raise KeyboardInterrupt
        return real(spec, run)

    monkeypatch.setattr(experiments, "simulate_run", interrupted)
    with pytest.raises(KeyboardInterrupt):
        run_experiment(out_of_reach(), tmp_path)

    assert seen[0]["complete"] is False
    assert [r["run_id"] for r in seen[0]["runs"]] == ["soft-pot-p0-t0"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert len(pd.read_csv(tmp_path / "summary.csv")) == 1
    assert (tmp_path / "traces" / "soft-pot-p0-t0.csv").exists()
    assert not (tmp_path / "traces" / "hard-pot-p0-t0.csv").exists()


# ============================================================================
# Builtin experiments end to end
# ============================================================================

@pytest.fixture
def settlements(monkeypatch):
    """Every equilibrium the engine reaches while the fixture is active."""
    seen = []
    real = engine.settle_object

    def recording(*args, **kwargs):
        result = real(*args, **kwargs)
        seen.append(result)
        return result

    monkeypatch.setattr(engine, "settle_object", recording)
    return seen


def assert_inside_friction_cones(seen, sim):
    assert seen
    for settlement in seen:
        assert settlement.residual_force < sim.equilibrium_tol_force
        for c in settlement.contacts:
            assert c.normal_force >= 0.0
            assert abs(c.tangent_force) <= c.mu * c.normal_force + 1e-9


@pytest.mark.slow
def test_builtin_pots_separate_soft_from_hard(tmp_path, settlements):
    spec = builtin_experiments()["pots-soft-vs-hard"]
    started = time.perf_counter()
    result = run_experiment(spec, tmp_path)
    elapsed = time.perf_counter() - started

    assert elapsed < 300.0
    assert result.invalid_runs == []
    assert len(result.summary) == 24
    assert_inside_friction_cones(settlements, spec.sim)

    report = compare_report([tmp_path])
    table = report.table.set_index(["mode", "object_id"])
    soft_ok = {obj for (mode, obj), row in table.iterrows() if mode == "soft" and row["succeeded"]}
    hard_ok = {obj for (mode, obj), row in table.iterrows() if mode == "hard" and row["succeeded"]}
    assert soft_ok == {"pot-A", "pot-B", "pot-C"}
    assert hard_ok == {"pot-C"}
    assert max(table.loc[("soft", "pot-A"), "max_added_kg"], table.loc[("soft", "pot-B"), "max_added_kg"]) >= 4 * LB - 1e-9
    assert max(table.loc[("hard", "pot-A"), "max_added_kg"], table.loc[("hard", "pot-B"), "max_added_kg"]) <= LB + 1e-9
    assert report.flags == {
        "soft_superset": True,
        "largest_not_grasped": True,
        "soft_more_displacements": True,
        "soft_holds_more_weight": True,
    }


@pytest.mark.slow
def test_builtin_hamper_is_grasped_from_both_orientations(tmp_path, settlements):
    spec = builtin_experiments()["hamper-poses"]
    result = run_experiment(spec, tmp_path)
    summary = result.summary.set_index("pose_index")

    assert result.invalid_runs == []
    assert list(summary["status"]) == ["completed", "completed"]
    assert (summary["final_contacts"] >= 3).all()
    assert summary.loc[0, "steps_to_grasp"] < summary.loc[1, "steps_to_grasp"]
    assert compare_report([tmp_path]).flags == {"first_pose_fastest": True}
    for run_id in summary["run_id"]:
        trace = pd.read_csv(tmp_path / "traces" / f"{run_id}.csv")
        assert trace["stage"].is_monotonic_increasing
        assert trace["stage"].iloc[-1] == spec.policy.stage_count
    assert_inside_friction_cones(settlements, spec.sim)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(builtin_experiments()))
def test_builtin_summaries_are_byte_identical(tmp_path, name):
    spec = builtin_experiments()[name]
    run_experiment(spec, tmp_path / "serial", jobs=1)
    run_experiment(spec, tmp_path / "parallel", jobs=2)
    assert (tmp_path / "serial" / "summary.csv").read_bytes() == (tmp_path / "parallel" / "summary.csv").read_bytes()
