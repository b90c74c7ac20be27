"""Static SVG figures rendered from the result CSVs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .engine import LB  # noqa: E402

# Fixed ids and no timestamp, so a plot only depends on its CSV.
matplotlib.rcParams["svg.hashsalt"] = "wholebody-grasp"
_SVG_METADATA = {"Date": None}

OUTCOME_CODES = {"success": 0, "displacement": 1, "failure": 2, "": 3}
OUTCOME_COLORS = ["#4caf50", "#ffc107", "#e53935", "#bdbdbd"]

def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def plot_outcome_grid(summary: pd.DataFrame, path: Path) -> None:
    """Outcome per object (rows) and mode/trial/pose (columns), annotated with the added weight in lb."""
    frame = summary.copy()
    frame["column"] = frame["mode"] + " p" + frame["pose_index"].astype(str) + " t" + frame["trial"].astype(str)
    objects = list(dict.fromkeys(frame["object_id"]))
    columns = list(dict.fromkeys(frame["column"]))
    codes = np.full((len(objects), len(columns)), OUTCOME_CODES[""], dtype=float)
    labels = [["" for _ in columns] for _ in objects]
    for _, row in frame.iterrows():
        i, j = objects.index(row["object_id"]), columns.index(row["column"])
        outcome = row["outcome"] if isinstance(row["outcome"], str) else ""
        codes[i, j] = OUTCOME_CODES.get(outcome, OUTCOME_CODES[""])
        added = row["max_added_kg"]
        if outcome and added != "" and not pd.isna(added):
            labels[i][j] = f"+{float(added) / LB:.0f}"

    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(columns) + 2.0), 0.6 * len(objects) + 1.5))
    ax.imshow(codes, cmap=ListedColormap(OUTCOME_COLORS), vmin=0, vmax=3, aspect="auto")
    for i, row_labels in enumerate(labels):
        for j, text in enumerate(row_labels):
            if text:
                ax.text(j, i, text, ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(columns)), columns, rotation=60, ha="right", fontsize=7)
    ax.set_yticks(range(len(objects)), objects)
    ax.set_title("Outcome (green success, amber displacement, red failure; +lb held)", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_trace(trace: pd.DataFrame, path: Path, title: str = "") -> None:
    """Relative pressures, joint velocity commands and stage over time."""
    grasp = trace[trace["weight"] == 0]
    fig, (ax_p, ax_q) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.0))
    for column in [c for c in trace.columns if c.startswith("dp_")]:
        ax_p.plot(grasp["t"], grasp[column], label=column[3:], linewidth=1.0)
    ax_p.set_ylabel("relative pressure (hPa)")
    ax_p.legend(fontsize=6, ncol=4)
    for column in [c for c in trace.columns if c.startswith("qdot_")]:
        ax_q.plot(grasp["t"], grasp[column], label=column[5:], linewidth=1.0)
    ax_stage = ax_q.twinx()
    ax_stage.step(grasp["t"], grasp["stage"], where="post", color="black", linewidth=0.8, linestyle="--")
    ax_stage.set_ylabel("stage")
    ax_q.set_ylabel("joint velocity (rad/s)")
    ax_q.set_xlabel("t (s)")
    ax_q.legend(fontsize=6, ncol=3)
    if title:
        fig.suptitle(title, fontsize=9)
    fig.tight_layout()
    _save(fig, path)
