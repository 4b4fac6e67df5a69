"""Model checkpoints in the same meta.json + raw f32le layout as datasets."""

import logging
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from ..core.datastore import StandardizationStats, load_arrays, read_meta, save_arrays
from ..core.errors import DimensionError, MetaValidationError
from ..core.models import ModelConfig
from .tcwm import TcwmModel

logger = logging.getLogger(__name__)


def save_checkpoint(model: TcwmModel, path: Path, experiment: dict[str, Any] | None = None) -> None:
    """Write every parameter as ``<name>.f32`` plus meta.json."""
    arrays = {**model.named_parameters(), **model.visual_parameters()}
    info: dict[str, Any] = {
        "dims": {"d_x": model.d_x, "d_p": model.d_p, "d_a": model.d_a},
        "model": model.config.model_dump(mode="json"),
        "stats": model.stats.to_dict() if model.stats is not None else None,
        "experiment": experiment,
    }
    save_arrays(Path(path), "checkpoint", arrays, info)
    logger.info("saved checkpoint (%d arrays) to %s", len(arrays), path)


def load_checkpoint(path: Path) -> TcwmModel:
    path = Path(path)
    meta = read_meta(path, kind="checkpoint")
    try:
        dims = meta.info["dims"]
        config = ModelConfig.model_validate(meta.info["model"])
    except (KeyError, TypeError, ValidationError) as e:
        raise MetaValidationError(f"checkpoint meta.json at {path} is incomplete: {e}") from e

    model = TcwmModel.create(dims["d_x"], dims["d_p"], dims["d_a"], config)
    params = {**model.named_parameters(), **model.visual_parameters()}
    missing = sorted(set(params) - set(meta.arrays))
    if missing:
        raise MetaValidationError(f"checkpoint lacks parameters: {', '.join(missing)}")
    arrays = load_arrays(path, meta)
    for name, target in params.items():
        if arrays[name].shape != target.shape:
            raise DimensionError(f"checkpoint parameter '{name}'", target.shape, arrays[name].shape)
        target[...] = arrays[name]
    if meta.info.get("stats"):
        model.stats = StandardizationStats.from_dict(meta.info["stats"])
    return model


def checkpoint_experiment(path: Path) -> dict[str, Any] | None:
    """Experiment config snapshot stored alongside a checkpoint, if any."""
    return read_meta(Path(path), kind="checkpoint").info.get("experiment")
