"""Adam optimizer over named parameter dictionaries."""

from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DimensionError, NumericError


@dataclass
class AdamState:
    """First/second moments per parameter plus the step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], lr: float = 1e-3, **kwargs: float) -> "AdamState":
        state = cls(lr=lr, **kwargs)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Bias-corrected Adam update, applied in place.

    Entries whose gradient is exactly zero keep their value (their moments
    still decay), so frozen or unused parameters never drift. Every gradient
    is checked before anything is mutated.
    """
    if state.step < 0:
        raise ValueError(f"step counter must be >= 0, got {state.step}")
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter '{name}'")
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient '{name}'", params[name].shape, g.shape)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for '{name}'")

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, g in grads.items():
        p = params[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p -= np.where(g != 0, update, 0).astype(p.dtype)
    return params
