"""Training windows of H+2 consecutive steps inside one episode."""

from dataclasses import dataclass

import numpy as np

from ..core.datastore import StandardizationStats
from ..core.errors import DomainError
from ..world.dataset import TrajectoryBatch


@dataclass
class WindowBatch:
    """Per-sample windows: arrays shaped (B, H+2, dim).

    ``proprio`` is already standardized. Steps 0..H form the model input,
    step H+1 is the prediction target.
    """

    embeddings: np.ndarray
    proprio: np.ndarray
    actions: np.ndarray
    renders: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def length(self) -> int:
        return self.embeddings.shape[1]


def window_starts(boundaries: list[int], n_steps: int, history: int) -> np.ndarray:
    """Start indices whose H+2 steps stay inside a single episode."""
    span = history + 2
    ends = [*boundaries[1:], n_steps]
    starts = [np.arange(b, e - span + 1) for b, e in zip(boundaries, ends) if e - b >= span]
    if not starts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(starts).astype(np.int64)


def gather_windows(
    batch: TrajectoryBatch,
    starts: np.ndarray,
    history: int,
    stats: StandardizationStats,
    with_renders: bool = False,
) -> WindowBatch:
    if len(starts) == 0:
        raise DomainError("no windows to gather")
    idx = np.asarray(starts)[:, None] + np.arange(history + 2)[None, :]
    renders = None
    if with_renders and batch.renders is not None:
        renders = batch.renders[idx].reshape(len(starts), history + 2, -1)
    return WindowBatch(
        embeddings=batch.embeddings[idx],
        proprio=stats.standardize(batch.proprio[idx]),
        actions=batch.actions[idx],
        renders=renders,
    )
