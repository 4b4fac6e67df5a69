"""Dense layers with explicit analytic gradients."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DimensionError, NumericError

DEFAULT_DTYPE = np.float32


def _flatten_batch(x: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    lead = x.shape[:-1]
    return x.reshape(-1, x.shape[-1]), lead


def require_finite(name: str, arr: np.ndarray) -> None:
    """Raise NumericError if ``arr`` holds NaN or infinity."""
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")


@dataclass
class AffineGrads:
    """Gradients of one AffineLayer, shaped like its parameters."""

    weight: np.ndarray
    bias: np.ndarray


@dataclass
class AffineLayer:
    """y = weight·x + bias, broadcast over leading batch dimensions."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError("affine bias", (self.weight.shape[0],), self.bias.shape)

    @classmethod
    def init(
        cls,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        scale: float | None = None,
        dtype: type = DEFAULT_DTYPE,
    ) -> "AffineLayer":
        """Gaussian weights with std ``scale`` (default 1/sqrt(in_dim)), zero bias."""
        std = (1.0 / np.sqrt(max(in_dim, 1))) if scale is None else scale
        weight = (rng.standard_normal((out_dim, in_dim)) * std).astype(dtype)
        return cls(weight=weight, bias=np.zeros(out_dim, dtype=dtype))

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int, dtype: type = DEFAULT_DTYPE) -> "AffineLayer":
        return cls(weight=np.zeros((out_dim, in_dim), dtype=dtype), bias=np.zeros(out_dim, dtype=dtype))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return affine_apply(self, x)

    def backward(self, x: np.ndarray, upstream: np.ndarray) -> tuple[AffineGrads, np.ndarray]:
        """Gradients w.r.t. weight, bias and input, summed over the batch."""
        x2, lead = _flatten_batch(np.asarray(x, dtype=self.weight.dtype))
        g2, _ = _flatten_batch(np.asarray(upstream, dtype=self.weight.dtype))
        grads = AffineGrads(weight=g2.T @ x2, bias=g2.sum(axis=0))
        dx = (g2 @ self.weight).reshape(*lead, self.in_dim)
        return grads, dx

    def named_parameters(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {f"{prefix}weight": self.weight, f"{prefix}bias": self.bias}

    def astype(self, dtype: type) -> "AffineLayer":
        return AffineLayer(weight=self.weight.astype(dtype), bias=self.bias.astype(dtype))


def affine_apply(layer: AffineLayer, x: np.ndarray) -> np.ndarray:
    """Apply ``layer`` to the last dimension of ``x``."""
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] != layer.in_dim:
        raise DimensionError("affine input", (..., layer.in_dim), x.shape)
    x = x.astype(layer.weight.dtype, copy=False)
    return x @ layer.weight.T + layer.bias


@dataclass
class MlpCache:
    """Intermediate values of one MlpNet forward pass."""

    inputs: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)


@dataclass
class MlpNet:
    """Stack of AffineLayers with tanh between layers and identity at the output."""

    layers: list[AffineLayer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("MlpNet needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionError("mlp layer chain", prev.out_dim, nxt.in_dim)

    @classmethod
    def init(
        cls,
        widths: Sequence[int],
        rng: np.random.Generator,
        dtype: type = DEFAULT_DTYPE,
        out_scale: float | None = None,
    ) -> "MlpNet":
        """Net with layer sizes ``widths`` = (in, hidden..., out)."""
        if len(widths) < 2:
            raise ValueError(f"need at least input and output width, got {widths}")
        layers = [AffineLayer.init(a, b, rng, dtype=dtype) for a, b in zip(widths[:-2], widths[1:-1])]
        layers.append(AffineLayer.init(widths[-2], widths[-1], rng, scale=out_scale, dtype=dtype))
        return cls(layers=layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = x
        for i, layer in enumerate(self.layers):
            h = affine_apply(layer, h)
            if i < len(self.layers) - 1:
                h = np.tanh(h)
        return h

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
        cache = MlpCache()
        h = np.asarray(x)
        for i, layer in enumerate(self.layers):
            cache.inputs.append(h)
            h = affine_apply(layer, h)
            if i < len(self.layers) - 1:
                h = np.tanh(h)
                cache.activations.append(h)
        return h, cache

    def backward(self, cache: MlpCache, upstream: np.ndarray) -> tuple[list[AffineGrads], np.ndarray]:
        require_finite("upstream gradient", upstream)
        grads: list[AffineGrads] = [None] * len(self.layers)  # type: ignore[list-item]
        g = np.asarray(upstream, dtype=self.layers[-1].weight.dtype)
        for i in range(len(self.layers) - 1, -1, -1):
            if i < len(self.layers) - 1:
                a = cache.activations[i]
                g = g * (1.0 - a * a)
            grads[i], g = self.layers[i].backward(cache.inputs[i], g)
        return grads, g

    def named_parameters(self, prefix: str = "") -> dict[str, np.ndarray]:
        params: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            params.update(layer.named_parameters(f"{prefix}{i}."))
        return params

    def grads_to_dict(self, grads: list[AffineGrads], prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, g in enumerate(grads):
            out[f"{prefix}{i}.weight"] = g.weight
            out[f"{prefix}{i}.bias"] = g.bias
        return out

    def astype(self, dtype: type) -> "MlpNet":
        return MlpNet(layers=[layer.astype(dtype) for layer in self.layers])


def backprop(net: MlpNet | AffineLayer, x: np.ndarray, upstream: np.ndarray) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Parameter gradients (by name) and input gradient of ``net`` at ``x``."""
    require_finite("upstream gradient", upstream)
    if isinstance(net, AffineLayer):
        g, dx = net.backward(x, upstream)
        return {"weight": g.weight, "bias": g.bias}, dx
    out, cache = net.forward_cache(x)
    if np.shape(upstream) != out.shape:
        raise DimensionError("upstream gradient", out.shape, np.shape(upstream))
    grads, dx = net.backward(cache, upstream)
    return net.grads_to_dict(grads), dx
