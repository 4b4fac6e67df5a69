"""Dense numerics with analytic gradients."""

from .gradcheck import grad_check
from .layers import AffineGrads, AffineLayer, MlpNet, affine_apply, backprop, require_finite
from .optim import AdamState, adam_step

__all__ = [
    "AffineGrads",
    "AffineLayer",
    "MlpNet",
    "AdamState",
    "adam_step",
    "affine_apply",
    "backprop",
    "grad_check",
    "require_finite",
]
