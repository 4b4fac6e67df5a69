"""Loss terms and their analytic gradients."""

import numpy as np

from ..core.errors import DimensionError, DomainError
from ..numerics import AffineLayer

NORM_EPS = 1e-8


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise DimensionError("mse operands", pred.shape, target.shape)
    if pred.size == 0:
        raise DomainError("mse of an empty array")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype)


def _normalize(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norm = np.sqrt(np.sum(u * u, axis=-1, keepdims=True) + NORM_EPS**2)
    return u / norm, norm


def _normalize_backward(u_hat: np.ndarray, norm: np.ndarray, d_hat: np.ndarray) -> np.ndarray:
    return (d_hat - u_hat * np.sum(u_hat * d_hat, axis=-1, keepdims=True)) / norm


def info_nce(
    u: np.ndarray, v: np.ndarray, tau: float, include_positive: bool = True
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cosine InfoNCE with in-batch negatives.

    Row i of ``u`` is the anchor, row i of ``v`` its positive and the other
    rows of ``v`` its negatives. Returns the mean loss and the gradients
    w.r.t. ``u`` and ``v``.
    """
    if u.shape != v.shape or u.ndim != 2:
        raise DimensionError("contrastive pair", u.shape, v.shape)
    B = u.shape[0]
    if B < 2:
        raise DomainError(f"contrastive loss needs a batch of at least 2, got {B}")
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")

    u64 = u.astype(np.float64)
    v64 = v.astype(np.float64)
    u_hat, u_norm = _normalize(u64)
    v_hat, v_norm = _normalize(v64)
    logits = (u_hat @ v_hat.T) / tau
    eye = np.eye(B, dtype=bool)

    masked = logits if include_positive else np.where(eye, -np.inf, logits)
    top = masked.max(axis=1, keepdims=True)
    weights = np.exp(masked - top)
    lse = np.log(weights.sum(axis=1)) + top[:, 0]
    loss = float(np.mean(lse - np.diag(logits)))

    probs = weights / weights.sum(axis=1, keepdims=True)
    d_logits = (probs - eye) / B
    d_cos = d_logits / tau
    du_hat = d_cos @ v_hat
    dv_hat = d_cos.T @ u_hat
    du = _normalize_backward(u_hat, u_norm, du_hat)
    dv = _normalize_backward(v_hat, v_norm, dv_hat)
    return loss, du.astype(u.dtype), dv.astype(v.dtype)


def loss_align(
    z_s: np.ndarray,
    s_p: np.ndarray,
    align_head: AffineLayer,
    proprio_head: AffineLayer,
    tau: float,
    include_positive: bool = True,
) -> float:
    """InfoNCE between alignment-head images of latents and of standardized proprio."""
    loss, _, _ = info_nce(align_head(z_s), proprio_head(s_p), tau, include_positive)
    return loss


def loss_dyn_z(z_pred: np.ndarray, z_target: np.ndarray) -> float:
    return mse(z_pred, z_target)[0]


def loss_dyn_s(s_pred: np.ndarray, s_target: np.ndarray) -> float:
    return mse(s_pred, s_target)[0]


def loss_rec(x_hat: np.ndarray, x: np.ndarray) -> float:
    return mse(x_hat, x)[0]


def l1_penalty(weight: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of absolute weights and its subgradient (0 at 0)."""
    w = np.asarray(weight)
    return float(np.abs(w.astype(np.float64)).sum()), np.sign(w)
