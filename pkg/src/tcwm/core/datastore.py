"""On-disk datasets, raw array files and standardization statistics.

A stored directory holds ``meta.json`` plus one headerless little-endian
float32 file per array. ``meta.json`` is validated before any raw file is
read, and every write goes to a temporary file that is renamed into place.
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..world.dataset import TrajectoryBatch
from .errors import (
    ByteLengthError,
    DomainError,
    MetaValidationError,
    MissingFileError,
    UnsupportedDtypeError,
)

logger = logging.getLogger(__name__)

DTYPE_TAG = "f32le"
RAW_DTYPE = np.dtype("<f4")
STD_FLOOR = 1e-6
DATASET_ARRAYS = ("embeddings", "proprio", "actions", "latents")


class ArrayMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str
    shape: list[int] = Field(min_length=1)


class StoreMeta(BaseModel):
    """Contents of meta.json."""

    model_config = ConfigDict(extra="forbid")

    kind: str
    dtype: str
    arrays: dict[str, ArrayMeta]
    info: dict[str, Any] = Field(default_factory=dict)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(path: Path, payload: Any) -> None:
    _atomic_write(Path(path), json.dumps(payload, indent=2, sort_keys=True).encode("utf-8"))


def save_arrays(path: Path, kind: str, arrays: dict[str, np.ndarray], info: dict[str, Any] | None = None) -> None:
    """Write ``arrays`` as raw f32le files plus meta.json; meta.json goes last."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries: dict[str, ArrayMeta] = {}
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=RAW_DTYPE)
        shape = list(arr.shape) or [1]
        entries[name] = ArrayMeta(file=f"{name}.f32", shape=shape)
        _atomic_write(path / f"{name}.f32", arr.tobytes(order="C"))
    meta = StoreMeta(kind=kind, dtype=DTYPE_TAG, arrays=entries, info=info or {})
    _atomic_write(path / "meta.json", meta.model_dump_json(indent=2).encode("utf-8"))


def read_meta(path: Path, kind: str | None = None) -> StoreMeta:
    meta_file = Path(path) / "meta.json"
    if not meta_file.exists():
        raise MissingFileError(f"missing {meta_file}")
    try:
        raw = json.loads(meta_file.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MetaValidationError(f"{meta_file} is not valid UTF-8 JSON: {e}") from e
    if isinstance(raw, dict) and raw.get("dtype") not in (None, DTYPE_TAG):
        raise UnsupportedDtypeError(f"unsupported dtype tag '{raw['dtype']}' in {meta_file} (only {DTYPE_TAG})")
    try:
        meta = StoreMeta.model_validate(raw)
    except ValidationError as e:
        raise MetaValidationError(f"invalid {meta_file}: {e}") from e
    if kind is not None and meta.kind != kind:
        raise MetaValidationError(f"{meta_file} describes a {meta.kind}, expected a {kind}")
    return meta


def load_arrays(path: Path, meta: StoreMeta) -> dict[str, np.ndarray]:
    """Read every array listed in ``meta``, checking byte lengths first."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    for name, entry in meta.arrays.items():
        file = path / entry.file
        if not file.exists():
            raise MissingFileError(f"missing array file {file}")
        expected = RAW_DTYPE.itemsize * int(np.prod(entry.shape))
        got = file.stat().st_size
        if got != expected:
            raise ByteLengthError(name, expected, got)
        data = np.frombuffer(file.read_bytes(), dtype=RAW_DTYPE)
        out[name] = data.astype(np.float32).reshape(entry.shape)
    return out


def save_dataset(batch: TrajectoryBatch, path: Path) -> None:
    """Persist ``batch`` under ``path`` (bit-exact round trip)."""
    path = Path(path)
    arrays = {name: getattr(batch, name) for name in DATASET_ARRAYS}
    if batch.renders is not None:
        arrays["renders"] = batch.renders
    info = {
        "n_steps": batch.n_steps,
        "n_episodes": batch.n_episodes,
        "dims": {name: list(arr.shape[1:]) for name, arr in arrays.items()},
        "seed": batch.meta.get("seed"),
        "policy": batch.meta.get("policy"),
        "spec": batch.meta.get("spec"),
    }
    path.mkdir(parents=True, exist_ok=True)
    write_json(path / "boundaries.json", list(batch.boundaries))
    save_arrays(path, "dataset", arrays, info)
    logger.info("saved dataset with %d steps to %s", batch.n_steps, path)


def load_dataset(path: Path) -> TrajectoryBatch:
    path = Path(path)
    meta = read_meta(path, kind="dataset")
    missing = [name for name in DATASET_ARRAYS if name not in meta.arrays]
    if missing:
        raise MetaValidationError(f"dataset meta.json lacks arrays: {', '.join(missing)}")
    lengths = {entry.shape[0] for entry in meta.arrays.values()}
    if len(lengths) != 1:
        raise MetaValidationError(f"arrays disagree on step count: {sorted(lengths)}")

    bfile = path / "boundaries.json"
    if not bfile.exists():
        raise MissingFileError(f"missing {bfile}")
    try:
        boundaries = [int(b) for b in json.loads(bfile.read_text(encoding="utf-8"))]
    except (ValueError, TypeError) as e:
        raise MetaValidationError(f"invalid {bfile}: {e}") from e

    arrays = load_arrays(path, meta)
    try:
        return TrajectoryBatch(
            embeddings=arrays["embeddings"],
            proprio=arrays["proprio"],
            actions=arrays["actions"],
            latents=arrays["latents"],
            boundaries=boundaries,
            renders=arrays.get("renders"),
            meta={k: meta.info.get(k) for k in ("seed", "policy", "spec")},
        )
    except (ValueError, DomainError) as e:
        raise MetaValidationError(f"inconsistent dataset at {path}: {e}") from e


@dataclass
class StandardizationStats:
    """Per-dimension mean and population std of proprioception."""

    mean: np.ndarray
    std: np.ndarray

    def standardize(self, s: np.ndarray) -> np.ndarray:
        return ((np.asarray(s) - self.mean) / self.std).astype(np.float32)

    def destandardize(self, s: np.ndarray) -> np.ndarray:
        return (np.asarray(s) * self.std + self.mean).astype(np.float32)

    def to_dict(self) -> dict[str, list[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, list[float]]) -> "StandardizationStats":
        return cls(mean=np.asarray(d["mean"], dtype=np.float32), std=np.asarray(d["std"], dtype=np.float32))

    @classmethod
    def identity(cls, dim: int) -> "StandardizationStats":
        return cls(mean=np.zeros(dim, dtype=np.float32), std=np.ones(dim, dtype=np.float32))


def compute_stats(data: TrajectoryBatch | np.ndarray) -> StandardizationStats:
    """Mean and population std (floored at 1e-6) of proprio over ``data``."""
    values = data.proprio if isinstance(data, TrajectoryBatch) else np.asarray(data)
    if values.ndim != 2 or values.shape[0] == 0:
        raise DomainError("cannot compute statistics of an empty batch")
    values = values.astype(np.float64)
    mean = values.mean(axis=0)
    std = np.maximum(values.std(axis=0), STD_FLOOR)
    return StandardizationStats(mean=mean.astype(np.float32), std=std.astype(np.float32))


def split_episodes(batch: TrajectoryBatch, eval_fraction: float) -> tuple[TrajectoryBatch, TrajectoryBatch | None]:
    """Leading episodes train, trailing ``eval_fraction`` evaluate."""
    n = batch.n_episodes
    n_eval = int(round(n * eval_fraction))
    if eval_fraction > 0 and n > 1:
        n_eval = min(max(n_eval, 1), n - 1)
    else:
        n_eval = 0
    train = batch.select_episodes(list(range(n - n_eval)))
    evaluation = batch.select_episodes(list(range(n - n_eval, n))) if n_eval else None
    return train, evaluation
