"""CSV, JSON and optional SVG outputs of an evaluation run."""

import csv
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def write_csv(rows: Sequence[Mapping[str, Any]], path: Path) -> None:
    """Rows as CSV; the header is the union of keys in first-seen order."""
    header: list[str] = []
    for row in rows:
        header.extend(k for k in row if k not in header)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=header, restval="")
        writer.writeheader()
        writer.writerows(rows)


def write_json(payload: BaseModel, path: Path) -> None:
    Path(path).write_text(payload.model_dump_json(indent=2), encoding="utf-8")


def plot_curves(series: Mapping[str, Sequence[float]], path: Path, title: str = "", xlabel: str = "step") -> bool:
    """Line chart as SVG. Returns False when matplotlib is not installed."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib not installed; skipping %s", path)
        return False

    with matplotlib.rc_context({"svg.hashsalt": "tcwm", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, values in series.items():
            ax.plot(range(1, len(values) + 1), list(values), label=name)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return True
