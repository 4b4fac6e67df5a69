"""Observation perturbations and the probe-accuracy drop they cause."""

from typing import Literal

import numpy as np
from pydantic import BaseModel
from sklearn.linear_model import Ridge
from sklearn.metrics import r2_score

from ..core.datastore import split_episodes
from ..core.errors import DomainError
from ..model.tcwm import TcwmModel
from ..world.dataset import TrajectoryBatch
from .metrics import encode_batch

PerturbKind = Literal["gauss-noise", "channel-jitter"]

NOISE_STD = 0.1
JITTER_SCALE = (0.8, 1.2)
JITTER_SHIFT_STD = 0.05


def perturb(batch: TrajectoryBatch, kind: PerturbKind, rng: np.random.Generator, sigma: float = NOISE_STD) -> TrajectoryBatch:
    """Copy of ``batch`` with perturbed embeddings and renders (renders stay in [0, 1])."""
    x = batch.embeddings.astype(np.float64)
    renders = None if batch.renders is None else batch.renders.astype(np.float64)
    n = batch.n_steps
    match kind:
        case "gauss-noise":
            x = x + sigma * rng.standard_normal(x.shape)
            if renders is not None:
                renders = renders + sigma * rng.standard_normal(renders.shape)
        case "channel-jitter":
            x = x * rng.uniform(*JITTER_SCALE, x.shape) + rng.normal(0.0, JITTER_SHIFT_STD, x.shape)
            if renders is not None:
                lead = (n,) + (1,) * (renders.ndim - 1)
                renders = renders * rng.uniform(*JITTER_SCALE, lead) + rng.normal(0.0, JITTER_SHIFT_STD, lead)
        case _:
            raise DomainError(f"unknown perturbation '{kind}'")
    if renders is not None:
        renders = np.clip(renders, 0.0, 1.0).astype(np.float32)
    return batch.replace(embeddings=x.astype(np.float32), renders=renders)


class RobustnessResult(BaseModel):
    kind: PerturbKind
    clean_r2: float
    perturbed_r2: float
    relative_drop: float


def robustness_drop(
    model: TcwmModel,
    batch: TrajectoryBatch,
    kind: PerturbKind,
    rng: np.random.Generator,
    alpha: float = 1.0,
    eval_fraction: float = 0.2,
) -> RobustnessResult:
    """Ridge probe to the true latents fitted on clean data, scored on clean vs perturbed held-out data."""
    train, held_out = split_episodes(batch, eval_fraction)
    if held_out is None:
        raise DomainError("robustness needs at least two episodes")
    reg = Ridge(alpha=alpha).fit(encode_batch(model, train), train.latents)
    clean = float(r2_score(held_out.latents, reg.predict(encode_batch(model, held_out))))
    noisy = float(r2_score(held_out.latents, reg.predict(encode_batch(model, perturb(held_out, kind, rng)))))
    drop = (clean - noisy) / max(abs(clean), 1e-12)
    return RobustnessResult(kind=kind, clean_r2=clean, perturbed_r2=noisy, relative_drop=drop)
