"""Comparison tables across experiment summaries."""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .errors import SchemaMismatchError

logger = logging.getLogger(__name__)

GROUP = ["source", "object_id", "mode"]
NUMERIC = ["trials", "grasped", "held_empty", "max_added_kg", "max_weight_held_kg",
           "displacement_events", "mean_steps_to_grasp"]
_SIZE = re.compile(r"[-+]?\d*\.?\d+")


@dataclass
class Report:
    table: pd.DataFrame
    flags: dict[str, bool] = field(default_factory=dict)
    deltas: pd.DataFrame | None = None
    steps_by_pose: pd.DataFrame | None = None

    @property
    def markdown(self) -> str:
        parts = ["# Grasp comparison", "", _markdown_table(self.table)]
        if self.steps_by_pose is not None:
            parts += ["", "## Control steps to grasp by pose", "", _markdown_table(self.steps_by_pose)]
        if self.flags:
            parts += ["", "## Qualitative checks", ""]
            parts += [f"- {name}: {'yes' if value else 'no'}" for name, value in self.flags.items()]
        if self.deltas is not None:
            parts += ["", "## Differences against the first summary", "", _markdown_table(self.deltas)]
        return "\n".join(parts) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.table.to_csv(out / "report.csv", index=False, float_format="%.9g", lineterminator="\n")
        path = out / "report.md"
        path.write_text(self.markdown)
        return path


def _markdown_table(frame: pd.DataFrame) -> str:
    def cell(value) -> str:
        if isinstance(value, float):
            return f"{value:.4g}"
        return str(value)

    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *rows])


def _summary_path(path: str | Path) -> Path:
    path = Path(path)
    return path / "summary.csv" if path.is_dir() else path


def load_summaries(paths) -> pd.DataFrame:
    frames = []
    names = []
    columns = None
    for path in paths:
        csv = _summary_path(path)
        frame = pd.read_csv(csv, keep_default_na=False, na_values=[""])
        if columns is None:
            columns = list(frame.columns)
        elif list(frame.columns) != columns:
            raise SchemaMismatchError(f"{csv} has columns {list(frame.columns)}, expected {columns}")
        names.append(Path(path).name if Path(path).is_dir() else csv.parent.name or csv.stem)
        frame.insert(0, "source", names[-1])
        frames.append(frame)
    if not frames:
        raise SchemaMismatchError("no summaries given")
    if len(set(names)) < len(names):
        # identical directory names: fall back to positional labels
        for k, frame in enumerate(frames):
            frame["source"] = f"{k}:{names[k]}"
    return pd.concat(frames, ignore_index=True)


def _aggregate(summary: pd.DataFrame) -> pd.DataFrame:
    frame = summary.copy()
    frame["grasped_flag"] = frame["status"] == "completed"
    frame["held_flag"] = frame["grasped_flag"] & (
        frame["max_weight_held_kg"].fillna(0.0) >= frame["empty_weight_kg"] - 1e-9
    )
    frame["steps"] = frame["steps_to_grasp"].where(frame["grasped_flag"])
    table = frame.groupby(GROUP, sort=False).agg(
        size=("size", "first"),
        trials=("run_id", "count"),
        grasped=("grasped_flag", "sum"),
        held_empty=("held_flag", "sum"),
        max_added_kg=("max_added_kg", "max"),
        max_weight_held_kg=("max_weight_held_kg", "max"),
        displacement_events=("displacement_events", "sum"),
        mean_steps_to_grasp=("steps", "mean"),
        outcome=("outcome", lambda s: s.mode().iloc[0] if not s.mode().empty else ""),
    ).reset_index()
    table["succeeded"] = table["held_empty"] * 2 > table["trials"]
    for column in ("max_added_kg", "max_weight_held_kg", "mean_steps_to_grasp"):
        table[column] = table[column].astype(float).fillna(0.0)
    return table


def _size_value(label: str) -> float:
    match = _SIZE.search(str(label))
    return float(match.group()) if match else 0.0


def _flags(table: pd.DataFrame, summary: pd.DataFrame) -> dict[str, bool]:
    flags: dict[str, bool] = {}
    modes = set(table["mode"])
    if {"soft", "hard"} <= modes:
        soft = table[table["mode"] == "soft"]
        hard = table[table["mode"] == "hard"]
        soft_ok = set(soft.loc[soft["succeeded"], "object_id"])
        hard_ok = set(hard.loc[hard["succeeded"], "object_id"])
        flags["soft_superset"] = hard_ok <= soft_ok

        sizes = {obj: _size_value(size) for obj, size in zip(table["object_id"], table["size"])}
        largest = max(sizes, key=sizes.get)
        flags["largest_not_grasped"] = largest not in soft_ok | hard_ok

        flags["soft_more_displacements"] = soft["displacement_events"].sum() > hard["displacement_events"].sum()

        smallest = sorted(sizes, key=sizes.get)[:2]
        soft_small = soft[soft["object_id"].isin(smallest)]["max_added_kg"].max()
        hard_small = hard[hard["object_id"].isin(smallest)]["max_added_kg"].max()
        flags["soft_holds_more_weight"] = bool(soft_small > hard_small)

    if summary["pose_index"].nunique() > 1:
        grasped = summary[summary["status"] == "completed"]
        by_pose = grasped.groupby("pose_index")["steps_to_grasp"].mean()
        if 0 in by_pose.index and len(by_pose) > 1:
            flags["first_pose_fastest"] = bool(by_pose.loc[0] < by_pose.drop(0).min())
    return {name: bool(value) for name, value in flags.items()}


def _steps_by_pose(summary: pd.DataFrame) -> pd.DataFrame | None:
    if summary["pose_index"].nunique() < 2:
        return None
    grasped = summary[summary["status"] == "completed"]
    table = grasped.groupby(["source", "object_id", "mode", "pose_index", "pose_angle_deg"], sort=False)[
        "steps_to_grasp"].mean().reset_index()
    return table


def _deltas(table: pd.DataFrame) -> pd.DataFrame | None:
    sources = list(dict.fromkeys(table["source"]))
    if len(sources) < 2:
        return None
    keys = ["object_id", "mode"]
    base = table[table["source"] == sources[0]].set_index(keys)[NUMERIC]
    frames = []
    for other in sources[1:]:
        current = table[table["source"] == other].set_index(keys)[NUMERIC]
        diff = (current.astype(float) - base.astype(float)).dropna(how="all").reset_index()
        diff.insert(0, "source", other)
        frames.append(diff)
    return pd.concat(frames, ignore_index=True)


def compare_report(paths) -> Report:
    """Per-object, per-mode comparison of one or more experiment summaries."""
    summary = load_summaries(paths)
    table = _aggregate(summary)
    report = Report(
        table=table,
        flags=_flags(table, summary),
        deltas=_deltas(table),
        steps_by_pose=_steps_by_pose(summary),
    )
    logger.info(f"report over {summary['source'].nunique()} summary file(s): {report.flags}")
    return report
