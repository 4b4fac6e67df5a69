"""Empirical checks of the identifiability assumptions on a trained model."""

import logging

import numpy as np
from pydantic import BaseModel, computed_field
from scipy import stats

from ..core.errors import DomainError
from ..model.tcwm import TcwmModel, complement_block, task_block
from ..utils.seeding import derive_rng
from ..world.dataset import TrajectoryBatch
from .metrics import encode_batch
from .probes import ProbeResult, linear_probe

logger = logging.getLogger(__name__)

A1_MAX_SPREAD = 100.0
A1_MIN_FRACTION = 0.01
A2_MIN_SPEARMAN = 0.8
NEAR_ZERO = 1e-3


class A1Stats(BaseModel):
    """Forward sensitivity ‖Δx̂‖/‖Δz‖ of the decoder."""

    p5: float
    p50: float
    p95: float
    n_pairs: int
    passed: bool


class A2Stats(BaseModel):
    """Agreement between latent and embedding distances."""

    spearman: float | None
    pearson: float | None
    n_pairs: int
    collapsed_pairs: int
    passed: bool = False


class A4Stats(BaseModel):
    """How efficiently each latent block carries proprioception."""

    task: ProbeResult
    complement: ProbeResult | None
    task_efficiency: float
    complement_efficiency: float | None
    efficiency_ratio: float | None
    passed: bool = False


class AssumptionReport(BaseModel):
    a1: A1Stats | None = None
    a2: A2Stats | None = None
    a4: A4Stats | None = None

    @computed_field
    @property
    def passed(self) -> bool:
        """Every check that ran passed."""
        return all(c.passed for c in (self.a1, self.a2, self.a4) if c is not None)


def sensitivity_ratios(decoder, latents: np.ndarray, n_pairs: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """‖decoder(z + Δz) − decoder(z)‖ / ‖Δz‖ for random anchors and directions of length ``delta``."""
    Z = np.asarray(latents, dtype=np.float64)
    anchors = Z[rng.integers(0, len(Z), n_pairs)]
    directions = rng.standard_normal(anchors.shape)
    norms = np.linalg.norm(directions, axis=1)
    while np.any(norms == 0):
        zero = norms == 0
        directions[zero] = rng.standard_normal((int(zero.sum()), Z.shape[1]))
        norms = np.linalg.norm(directions, axis=1)
    dz = delta * directions / norms[:, None]
    dx = decoder(anchors + dz) - decoder(anchors)
    return np.linalg.norm(dx, axis=1) / np.linalg.norm(dz, axis=1)


def check_a1(
    model: TcwmModel, latents: np.ndarray, n_pairs: int = 4096, delta: float = 1e-3, rng: np.random.Generator | None = None
) -> A1Stats | None:
    """Percentiles of the decoder's forward sensitivity around observed latents."""
    if model.embed_decoder is None:
        return None
    rng = rng or np.random.default_rng(0)
    decoder = model.embed_decoder.astype(np.float64)
    ratios = sensitivity_ratios(decoder, latents, n_pairs, delta, rng)
    p5, p50, p95 = (float(v) for v in np.percentile(ratios, [5, 50, 95]))
    passed = p5 > 0 and p5 >= A1_MIN_FRACTION * p50 and p95 <= A1_MAX_SPREAD * p5
    return A1Stats(p5=p5, p50=p50, p95=p95, n_pairs=n_pairs, passed=passed)


def distance_agreement(z: np.ndarray, x: np.ndarray, n_pairs: int, rng: np.random.Generator) -> A2Stats:
    """Rank and linear correlation of ‖z_i − z_j‖ against ‖x_i − x_j‖ over random pairs."""
    n = len(z)
    if n < 2 or len(x) != n:
        raise DomainError("distance agreement needs at least two aligned samples")
    i = rng.integers(0, n, n_pairs)
    j = (i + rng.integers(1, n, n_pairs)) % n
    dz = np.linalg.norm(np.asarray(z, dtype=np.float64)[i] - z[j], axis=1)
    dx = np.linalg.norm(np.asarray(x, dtype=np.float64)[i] - x[j], axis=1)
    collapsed = int(np.sum((dx < NEAR_ZERO * max(np.median(dx), 1e-12)) & (dz > NEAR_ZERO * max(np.median(dz), 1e-12))))
    if np.ptp(dz) == 0 or np.ptp(dx) == 0:
        logger.warning("constant pairwise distances; correlations undefined")
        return A2Stats(spearman=None, pearson=None, n_pairs=n_pairs, collapsed_pairs=collapsed)
    spearman = float(stats.spearmanr(dz, dx).statistic)
    return A2Stats(
        spearman=spearman,
        pearson=float(stats.pearsonr(dz, dx).statistic),
        n_pairs=n_pairs,
        collapsed_pairs=collapsed,
        passed=spearman >= A2_MIN_SPEARMAN,
    )


def check_a2(
    model: TcwmModel, batch: TrajectoryBatch, n_pairs: int = 2048, rng: np.random.Generator | None = None
) -> A2Stats:
    return distance_agreement(encode_batch(model, batch), batch.embeddings, n_pairs, rng or np.random.default_rng(0))


def proprio_efficiency(
    z_s: np.ndarray, z_c: np.ndarray, proprio: np.ndarray, folds: int = 5, alpha: float = 1.0
) -> A4Stats:
    task = linear_probe(z_s, proprio, folds, alpha, label="z_s")
    task_eff = task.r2_mean / z_s.shape[1]
    if z_c.shape[1] == 0:
        return A4Stats(
            task=task,
            complement=None,
            task_efficiency=task_eff,
            complement_efficiency=None,
            efficiency_ratio=None,
            passed=task.r2_mean > 0,
        )
    comp = linear_probe(z_c, proprio, folds, alpha, label="z_c")
    comp_eff = comp.r2_mean / z_c.shape[1]
    ratio = task_eff / comp_eff if comp_eff > 0 else None
    return A4Stats(
        task=task,
        complement=comp,
        task_efficiency=task_eff,
        complement_efficiency=comp_eff,
        efficiency_ratio=ratio,
        passed=task_eff > comp_eff,
    )


def check_a4(model: TcwmModel, batch: TrajectoryBatch, folds: int = 5, alpha: float = 1.0) -> A4Stats:
    """Probe proprioception from z_s and from z_c; efficiency is R² per latent dim."""
    Z = encode_batch(model, batch)
    return proprio_efficiency(task_block(model, Z), complement_block(model, Z), batch.proprio, folds, alpha)


def assumption_report(
    model: TcwmModel,
    batch: TrajectoryBatch,
    a1_pairs: int = 4096,
    a1_delta: float = 1e-3,
    a2_pairs: int = 2048,
    folds: int = 5,
    alpha: float = 1.0,
    seed: int = 0,
) -> AssumptionReport:
    rng = derive_rng(seed, "assumptions")
    latents = encode_batch(model, batch)
    return AssumptionReport(
        a1=check_a1(model, latents, a1_pairs, a1_delta, rng),
        a2=check_a2(model, batch, a2_pairs, rng),
        a4=check_a4(model, batch, folds, alpha),
    )
