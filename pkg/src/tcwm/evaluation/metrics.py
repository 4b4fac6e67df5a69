"""Recovery, collapse, rollout and image-similarity metrics."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal
from sklearn.metrics import r2_score

from ..core.errors import DimensionError, DomainError
from ..model.tcwm import (
    TcwmModel,
    decode_embedding,
    decode_visual,
    encode_observation,
    predict_next,
    task_block,
)
from ..world.dataset import TrajectoryBatch

RIDGE_FALLBACK = 1e-6
SSIM_WINDOW = 8
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
MAX_SSIM_FRAMES = 256


@dataclass
class AffineFit:
    """z_true ≈ A · z_hat + b, with the R² of that fit."""

    A: np.ndarray
    b: np.ndarray
    r2: float
    ridge_fallback: bool = False

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "r2": self.r2, "ridge_fallback": self.ridge_fallback}


def affine_recovery(z_hat: np.ndarray, z_true: np.ndarray) -> AffineFit:
    """Least-squares affine map from estimated to true task-centric latents."""
    X = np.asarray(z_hat, dtype=np.float64)
    Y = np.asarray(z_true, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError("affine recovery rows", X.shape, Y.shape)
    n, d = X.shape
    if n <= d + 1:
        raise DomainError(f"need more than {d + 1} samples, got {n}")

    design = np.hstack([X, np.ones((n, 1))])
    fallback = np.linalg.matrix_rank(design) < d + 1
    if fallback:
        gram = design.T @ design + RIDGE_FALLBACK * np.eye(d + 1)
        coef = linalg.solve(gram, design.T @ Y, assume_a="pos")
    else:
        coef, *_ = linalg.lstsq(design, Y)
    pred = design @ coef
    return AffineFit(A=coef[:d].T, b=coef[d], r2=float(r2_score(Y, pred)), ridge_fallback=bool(fallback))


def effective_rank(latents: np.ndarray) -> float:
    """exp of the entropy of the normalised covariance spectrum."""
    Z = np.asarray(latents, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise DomainError("effective rank needs at least two samples")
    eig = np.clip(np.linalg.eigvalsh(np.cov(Z, rowvar=False).reshape(Z.shape[1], Z.shape[1])), 0.0, None)
    total = eig.sum()
    if total <= 0:
        return 1.0
    p = eig[eig > 0] / total
    return float(np.exp(-np.sum(p * np.log(p))))


@dataclass
class CollapseMetrics:
    effective_rank: float
    variances: np.ndarray

    @classmethod
    def of(cls, latents: np.ndarray) -> "CollapseMetrics":
        return cls(effective_rank=effective_rank(latents), variances=np.var(latents, axis=0))


def encode_batch(model: TcwmModel, batch: TrajectoryBatch) -> np.ndarray:
    return encode_observation(model, batch.embeddings, batch.proprio)


def rollout_mse(model: TcwmModel, batch: TrajectoryBatch, horizon: int) -> list[float]:
    """Open-loop latent error per step, divided by the mean latent variance."""
    if horizon < 0:
        raise DomainError("horizon must be non-negative")
    if horizon == 0:
        return []
    H = model.history
    Z = encode_batch(model, batch)
    A = batch.actions.astype(model.dtype)
    starts = [
        s
        for sl in batch.episode_slices()
        for s in range(sl.start, sl.stop - (H + horizon))
    ]
    if not starts:
        raise DomainError(f"no episode is long enough for horizon {horizon} with history {H}")
    starts = np.asarray(starts)
    z_win = Z[starts[:, None] + np.arange(H + 1)]
    a_hist = A[starts[:, None] + np.arange(H)] if H > 0 else np.zeros((len(starts), 0, model.d_a), dtype=model.dtype)
    scale = max(float(np.mean(np.var(Z, axis=0))), 1e-12)
    curve = []
    for k in range(horizon):
        a_win = np.concatenate([a_hist, A[starts + H + k][:, None]], axis=1)
        z_next = predict_next(model, z_win, a_win)
        target = Z[starts + H + k + 1]
        curve.append(float(np.mean((z_next.astype(np.float64) - target) ** 2)) / scale)
        z_win = np.concatenate([z_win[:, 1:], z_next[:, None]], axis=1)
        a_hist = a_win[:, 1:]
    return curve


def task_centric_recovery(model: TcwmModel, batch: TrajectoryBatch, d_s_true: int | None = None) -> AffineFit:
    """Affine fit from the model's task block to the true task-centric latents."""
    if d_s_true is None:
        spec = batch.meta.get("spec") or {}
        d_s_true = int(spec.get("d_s", model.d_s))
    z_hat = task_block(model, encode_batch(model, batch))
    return affine_recovery(z_hat, batch.latents[:, :d_s_true])


def ssim(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Mean SSIM over 8x8 uniform windows on unit dynamic range."""
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError("ssim images", a.shape, b.shape)
    if min(a.shape) < SSIM_WINDOW:
        raise DomainError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    window = np.full((SSIM_WINDOW, SSIM_WINDOW), 1.0 / SSIM_WINDOW**2)

    def filt(x: np.ndarray) -> np.ndarray:
        return signal.convolve2d(x, window, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)) / (
        (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return float(ssim_map.mean())


def visual_fidelity(model: TcwmModel, batch: TrajectoryBatch, max_frames: int = MAX_SSIM_FRAMES) -> float | None:
    """Mean SSIM between the renders and images decoded from reconstructed embeddings.

    ``None`` when the model has no visual decoder or the batch has no renders.
    At most ``max_frames`` evenly spaced frames are compared.
    """
    if model.visual_decoder is None or model.embed_decoder is None or batch.renders is None:
        return None
    if max_frames < 1:
        raise DomainError("need at least one frame for SSIM")
    idx = np.linspace(0, batch.n_steps - 1, min(max_frames, batch.n_steps)).astype(np.int64)
    Z = encode_batch(model, batch)[idx]
    images = np.clip(decode_visual(model, decode_embedding(model, Z)), 0.0, 1.0)
    renders = np.asarray(batch.renders[idx], dtype=np.float64).reshape(images.shape)
    return float(np.mean([ssim(img, ref) for img, ref in zip(images, renders)]))
