"""Central finite-difference verification of analytic gradients."""

import logging
from collections.abc import Callable

import numpy as np

from ..core.errors import NumericError

logger = logging.getLogger(__name__)

LossFn = Callable[[], tuple[float, dict[str, np.ndarray]]]


def grad_check(
    loss_fn: LossFn,
    params: dict[str, np.ndarray],
    h: float = 1e-3,
    tol: float = 1e-4,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max over checked entries of |analytic - FD| / max(1, |analytic|).

    ``loss_fn()`` evaluates the loss and its analytic gradients at the
    current contents of ``params``; entries are perturbed in place and
    restored. With ``max_entries`` only a random subset of each parameter is
    checked.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    loss0, analytic = loss_fn()
    if not np.isfinite(loss0):
        raise NumericError("loss is non-finite at the base point")
    rng = rng or np.random.default_rng(0)

    worst = 0.0
    worst_name = ""
    for name, p in params.items():
        flat = p.reshape(-1)
        grad = analytic.get(name)
        grad_flat = np.zeros(flat.size) if grad is None else np.asarray(grad, dtype=np.float64).reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            plus, _ = loss_fn()
            flat[i] = orig - h
            minus, _ = loss_fn()
            flat[i] = orig
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"loss is non-finite when perturbing {name}[{i}]")
            fd = (plus - minus) / (2.0 * h)
            err = abs(grad_flat[i] - fd) / max(1.0, abs(grad_flat[i]))
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
    if worst > tol:
        logger.warning("gradient check failed: rel err %.3g at %s (tol %.1g)", worst, worst_name, tol)
    return float(worst)
