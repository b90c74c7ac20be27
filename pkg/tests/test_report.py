import pandas as pd
import pytest

from wholebody_grasp.engine import LB
from wholebody_grasp.errors import SchemaMismatchError
from wholebody_grasp.experiments import SUMMARY_COLUMNS
from wholebody_grasp.report import compare_report, load_summaries

SIZES = {"pot-A": "11.4cm", "pot-B": "17.2cm", "pot-C": "22.9cm", "pot-D": "31.1cm"}


def row(object_id, mode, trial=0, outcome="success", added=5 * LB, events=0, steps=120, pose=0):
    grasped = outcome != "failure"
    empty = 1.0
    return {
        "run_id": f"{mode}-{object_id}-p{pose}-t{trial}", "object_id": object_id, "shape": "circle",
        "size": SIZES[object_id], "mode": mode, "pose_index": pose, "pose_angle_deg": 45.0 * pose, "trial": trial,
        "threshold_hpa": 20.0, "status": "completed" if grasped else "timeout", "outcome": outcome,
        "empty_weight_kg": empty, "max_weight_held_kg": empty + added if grasped else 0.0,
        "max_added_kg": added if grasped else 0.0, "displacement_events": events, "slip_distance_m": 0.0,
        "steps_to_grasp": steps if grasped else -1, "final_contacts": 3 if grasped else 0,
        "contact_regions": 3 if grasped else 0, "total_normal_force_n": 10.0, "capacity_n": 50.0,
        "collision_stops": 0, "chamber_stops": 0,
    }


def write_summary(directory, rows):
    directory.mkdir(parents=True)
    pd.DataFrame(rows, columns=SUMMARY_COLUMNS).to_csv(directory / "summary.csv", index=False)
    return directory


def soft_vs_hard_rows():
    rows = []
    for trial in range(3):
        rows += [
            row("pot-A", "soft", trial, "success", 5 * LB),
            row("pot-B", "soft", trial, "displacement", 4 * LB, events=1),
            row("pot-C", "soft", trial, "success", 2 * LB),
            row("pot-D", "soft", trial, "failure"),
            row("pot-A", "hard", trial, "success", 3 * LB),
            row("pot-B", "hard", trial, "success", 2 * LB),
            row("pot-C", "hard", trial, "failure"),
            row("pot-D", "hard", trial, "failure"),
        ]
    return rows


def test_single_summary_without_both_modes_has_no_flags(tmp_path):
    path = write_summary(tmp_path / "soft", [row("pot-A", "soft"), row("pot-B", "soft", outcome="failure")])
    report = compare_report([path])
    assert report.flags == {}
    assert report.deltas is None
    assert report.steps_by_pose is None
    table = report.table.set_index("object_id")
    assert table.loc["pot-A", "succeeded"]
    assert not table.loc["pot-B", "succeeded"]
    assert table.loc["pot-B", "mean_steps_to_grasp"] == 0.0


def test_aggregate_counts_trials(tmp_path):
    path = write_summary(tmp_path / "pots", soft_vs_hard_rows())
    table = compare_report([path]).table.set_index(["object_id", "mode"])
    assert len(table) == 8
    assert table.loc[("pot-B", "soft"), "trials"] == 3
    assert table.loc[("pot-B", "soft"), "grasped"] == 3
    assert table.loc[("pot-B", "soft"), "displacement_events"] == 3
    assert table.loc[("pot-B", "soft"), "outcome"] == "displacement"
    assert table.loc[("pot-C", "hard"), "held_empty"] == 0
    assert table.loc[("pot-A", "soft"), "max_added_kg"] == pytest.approx(5 * LB)
    assert table.loc[("pot-A", "soft"), "mean_steps_to_grasp"] == pytest.approx(120.0)


def test_soft_vs_hard_flags(tmp_path):
    path = write_summary(tmp_path / "pots", soft_vs_hard_rows())
    flags = compare_report([path]).flags
    assert flags == {
        "soft_superset": True,
        "largest_not_grasped": True,
        "soft_more_displacements": True,
        "soft_holds_more_weight": True,
    }


def test_flags_can_fail(tmp_path):
    rows = [
        row("pot-A", "soft", outcome="failure"),
        row("pot-D", "soft", outcome="success", added=1 * LB),
        row("pot-A", "hard", outcome="success", added=5 * LB, events=2),
        row("pot-D", "hard", outcome="failure"),
    ]
    flags = compare_report([write_summary(tmp_path / "odd", rows)]).flags
    assert flags["soft_superset"] is False
    assert flags["largest_not_grasped"] is False
    assert flags["soft_more_displacements"] is False
    assert flags["soft_holds_more_weight"] is False


def test_steps_by_pose(tmp_path):
    rows = [row("pot-A", "soft", pose=0, steps=100), row("pot-A", "soft", pose=1, steps=180)]
    report = compare_report([write_summary(tmp_path / "poses", rows)])
    assert report.flags == {"first_pose_fastest": True}
    assert list(report.steps_by_pose["steps_to_grasp"]) == [100.0, 180.0]
    assert "Control steps to grasp by pose" in report.markdown


def test_identical_summaries_give_zero_deltas(tmp_path):
    rows = soft_vs_hard_rows()
    first = write_summary(tmp_path / "first", rows)
    second = write_summary(tmp_path / "second", rows)
    report = compare_report([first, second])
    assert set(report.deltas["source"]) == {"second"}
    assert len(report.deltas) == 8
    assert (report.deltas[["trials", "grasped", "max_added_kg"]] == 0.0).all().all()


def test_deltas_track_changes(tmp_path):
    first = write_summary(tmp_path / "before", [row("pot-A", "soft", added=2 * LB)])
    second = write_summary(tmp_path / "after", [row("pot-A", "soft", added=3 * LB)])
    deltas = compare_report([first, second]).deltas
    assert deltas.loc[0, "max_added_kg"] == pytest.approx(LB)


def test_summary_file_paths_are_accepted(tmp_path):
    path = write_summary(tmp_path / "soft", [row("pot-A", "soft")])
    summary = load_summaries([path / "summary.csv"])
    assert list(summary["source"]) == ["soft"]


def test_duplicate_source_names_get_positional_labels(tmp_path):
    a = write_summary(tmp_path / "a" / "results", [row("pot-A", "soft")])
    b = write_summary(tmp_path / "b" / "results", [row("pot-A", "soft")])
    summary = load_summaries([a, b])
    assert list(summary["source"]) == ["0:results", "1:results"]


def test_multi_row_summaries_keep_their_names(tmp_path):
    rows = soft_vs_hard_rows()
    first = write_summary(tmp_path / "first", rows)
    second = write_summary(tmp_path / "second", rows)
    summary = load_summaries([first, second])
    assert list(summary["source"]) == ["first"] * len(rows) + ["second"] * len(rows)


def test_column_mismatch_is_rejected(tmp_path):
    good = write_summary(tmp_path / "good", [row("pot-A", "soft")])
    bad = tmp_path / "bad"
    bad.mkdir()
    pd.DataFrame([{"run_id": "x", "outcome": "success"}]).to_csv(bad / "summary.csv", index=False)
    with pytest.raises(SchemaMismatchError, match="columns"):
        compare_report([good, bad])


def test_no_summaries_is_an_error():
    with pytest.raises(SchemaMismatchError):
        load_summaries([])


def test_missing_summary_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_summaries([tmp_path / "nothing.csv"])


def test_write_outputs(tmp_path):
    report = compare_report([write_summary(tmp_path / "pots", soft_vs_hard_rows())])
    path = report.write(tmp_path / "out")
    assert path == tmp_path / "out" / "report.md"
    text = path.read_text()
    assert text.startswith("# Grasp comparison")
    assert "- soft_superset: yes" in text
    table = pd.read_csv(tmp_path / "out" / "report.csv")
    assert len(table) == 8
