"""Training objective and offline training loop."""

from .losses import info_nce, l1_penalty, loss_align, loss_dyn_s, loss_dyn_z, loss_rec, mse
from .trainer import (
    EpochRecord,
    FrozenTargets,
    LossBreakdown,
    TrainOptions,
    TrainReport,
    frozen_targets,
    objective,
    total_loss,
    train,
)
from .windows import WindowBatch, gather_windows, window_starts

__all__ = [
    "EpochRecord",
    "FrozenTargets",
    "LossBreakdown",
    "TrainOptions",
    "TrainReport",
    "WindowBatch",
    "frozen_targets",
    "gather_windows",
    "info_nce",
    "l1_penalty",
    "loss_align",
    "loss_dyn_s",
    "loss_dyn_z",
    "loss_rec",
    "mse",
    "objective",
    "total_loss",
    "train",
    "window_starts",
]
