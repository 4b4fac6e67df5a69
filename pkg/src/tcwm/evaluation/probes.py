"""Cross-validated ridge probes from latents to targets."""

from typing import Literal

import numpy as np
from pydantic import BaseModel
from sklearn.linear_model import Ridge
from sklearn.metrics import r2_score
from sklearn.model_selection import KFold

from ..core.errors import DimensionError, DomainError

BlockLabel = Literal["z_s", "z_c", "full-z", "raw-embedding", "other"]


class ProbeResult(BaseModel):
    """Held-out R² of a linear probe, averaged across folds."""

    label: BlockLabel = "other"
    target: str = "proprio"
    folds: int
    r2_mean: float
    r2_std: float
    per_dim: list[float]


def linear_probe(
    latents: np.ndarray,
    targets: np.ndarray,
    folds: int = 5,
    alpha: float = 1.0,
    label: BlockLabel = "other",
    seed: int = 0,
    target: str = "proprio",
) -> ProbeResult:
    """K-fold ridge regression; R² is uniform-averaged over target dims."""
    X = np.asarray(latents, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError("probe rows", X.shape[:1], Y.shape[:1])
    if folds < 2:
        raise DomainError(f"need at least 2 folds, got {folds}")
    if X.shape[0] < 2 * folds:
        raise DomainError(f"need at least {2 * folds} samples for {folds} folds, got {X.shape[0]}")
    if alpha <= 0:
        raise DomainError("ridge alpha must be positive")

    scores, per_dim = [], []
    for train_idx, test_idx in KFold(n_splits=folds, shuffle=True, random_state=seed).split(X):
        reg = Ridge(alpha=alpha, fit_intercept=True).fit(X[train_idx], Y[train_idx])
        pred = reg.predict(X[test_idx])
        scores.append(r2_score(Y[test_idx], pred, multioutput="uniform_average"))
        per_dim.append(r2_score(Y[test_idx], pred, multioutput="raw_values"))
    return ProbeResult(
        label=label,
        target=target,
        folds=folds,
        r2_mean=float(np.mean(scores)),
        r2_std=float(np.std(scores)),
        per_dim=[float(v) for v in np.mean(per_dim, axis=0)],
    )
