"""Task-centric world model: joint embedding, linear latent, split, dynamics."""

import copy
from dataclasses import dataclass

import numpy as np

from ..core.datastore import StandardizationStats
from ..core.errors import DimensionError, DomainError
from ..core.models import ModelConfig
from ..numerics import AffineLayer, MlpNet, require_finite
from ..numerics.layers import DEFAULT_DTYPE
from ..utils.seeding import derive_rng

RENDER_PIXELS = 16 * 16
COMPONENTS = (
    "proprio_embedder",
    "projector",
    "align_head",
    "proprio_head",
    "dynamics",
    "tc_dynamics",
    "embed_decoder",
)


@dataclass
class LatentState:
    """Latent z with its task-centric view ``z_s`` and complement ``z_c``.

    ``z`` may carry leading batch axes. ``task_idx`` names the task block
    coordinates; without it the block is the leading ``d_s`` slice.
    """

    z: np.ndarray
    d_s: int
    task_idx: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.d_s <= self.z.shape[-1]:
            raise DimensionError("task split", f"<= {self.z.shape[-1]}", self.d_s)
        if self.task_idx is not None and (
            len(self.task_idx) != self.d_s or any(not 0 <= i < self.z.shape[-1] for i in self.task_idx)
        ):
            raise DimensionError("task indices", f"{self.d_s} indices below {self.z.shape[-1]}", self.task_idx)
        require_finite("latent", self.z)

    @property
    def indices(self) -> list[int]:
        return list(self.task_idx) if self.task_idx is not None else list(range(self.d_s))

    @property
    def z_s(self) -> np.ndarray:
        return self.z[..., self.indices]

    @property
    def z_c(self) -> np.ndarray:
        rest = [i for i in range(self.dim) if i not in set(self.indices)]
        return self.z[..., rest]

    @property
    def dim(self) -> int:
        return self.z.shape[-1]


@dataclass
class TcwmModel:
    """All trainable components plus the proprio statistics they were fit with.

    In direct-embedding mode the embedder is a fixed identity and the latent
    is ``concat(x_vis, s_p)``; projector, decoder and alignment heads are
    absent.
    """

    config: ModelConfig
    d_x: int
    d_p: int
    d_a: int
    dynamics: MlpNet
    proprio_embedder: AffineLayer | None = None
    projector: AffineLayer | None = None
    align_head: AffineLayer | None = None
    proprio_head: AffineLayer | None = None
    tc_dynamics: MlpNet | None = None
    embed_decoder: AffineLayer | None = None
    visual_decoder: MlpNet | None = None
    stats: StandardizationStats | None = None

    @classmethod
    def create(
        cls,
        d_x: int,
        d_p: int,
        d_a: int,
        config: ModelConfig,
        seed: int = 0,
        dtype: type = DEFAULT_DTYPE,
    ) -> "TcwmModel":
        """Freshly initialised model; every component draws from its own stream."""
        H = config.history
        hidden = list(config.hidden)

        def rng(name: str) -> np.random.Generator:
            return derive_rng(seed, "model", name)

        if config.mode == "direct-embedding":
            latent = d_x + d_p
            dyn = MlpNet.init([(H + 1) * (latent + d_a), *hidden, latent], rng("dynamics"), dtype=dtype)
            return cls(config=config, d_x=d_x, d_p=d_p, d_a=d_a, dynamics=dyn)

        d_z, d_s = config.d_z, config.d_s
        d_pe = config.d_pe or d_p
        d_align = config.d_align or d_s + 1
        align_in = d_s if config.align_input == "slice" else d_z
        window = (H + 1) * (d_z + d_a)
        visual = None
        if config.visual_decoder:
            visual = MlpNet.init([d_x, config.visual_hidden, RENDER_PIXELS], rng("visual_decoder"), dtype=dtype)
        return cls(
            config=config,
            d_x=d_x,
            d_p=d_p,
            d_a=d_a,
            proprio_embedder=AffineLayer.init(d_p, d_pe, rng("proprio_embedder"), dtype=dtype),
            projector=AffineLayer.init(d_x + d_pe, d_z, rng("projector"), dtype=dtype),
            align_head=AffineLayer.init(align_in, d_align, rng("align_head"), dtype=dtype),
            proprio_head=AffineLayer.init(d_p, d_align, rng("proprio_head"), dtype=dtype),
            dynamics=MlpNet.init([window, *hidden, d_z], rng("dynamics"), dtype=dtype),
            tc_dynamics=MlpNet.init([window, *hidden, d_p], rng("tc_dynamics"), dtype=dtype),
            embed_decoder=AffineLayer.init(d_z, d_x + d_pe, rng("embed_decoder"), dtype=dtype),
            visual_decoder=visual,
        )

    @property
    def direct(self) -> bool:
        return self.config.mode == "direct-embedding"

    @property
    def history(self) -> int:
        return self.config.history

    @property
    def latent_dim(self) -> int:
        return self.dynamics.out_dim

    @property
    def joint_dim(self) -> int:
        if self.proprio_embedder is None:
            return self.d_x + self.d_p
        return self.d_x + self.proprio_embedder.out_dim

    @property
    def d_s(self) -> int:
        return min(self.config.d_s, self.latent_dim)

    @property
    def dtype(self) -> np.dtype:
        return self.dynamics.layers[0].weight.dtype

    def named_parameters(self) -> dict[str, np.ndarray]:
        """World-model parameters by dotted name (visual decoder excluded)."""
        params: dict[str, np.ndarray] = {}
        for name in COMPONENTS:
            part = getattr(self, name)
            if part is not None:
                params.update(part.named_parameters(f"{name}."))
        return params

    def visual_parameters(self) -> dict[str, np.ndarray]:
        if self.visual_decoder is None:
            return {}
        return self.visual_decoder.named_parameters("visual_decoder.")

    def astype(self, dtype: type) -> "TcwmModel":
        """Deep copy with every parameter cast to ``dtype``."""
        clone = copy.deepcopy(self)
        for name in (*COMPONENTS, "visual_decoder"):
            part = getattr(clone, name)
            if part is not None:
                setattr(clone, name, part.astype(dtype))
        return clone

    def copy(self) -> "TcwmModel":
        return copy.deepcopy(self)


def _check_last(name: str, arr: np.ndarray, dim: int) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise DimensionError(name, (..., dim), arr.shape)
    return arr


def embed_joint(model: TcwmModel, x_vis: np.ndarray, s_p: np.ndarray) -> np.ndarray:
    """concat(x_vis, f_emb(s_p)) for standardized proprio ``s_p``."""
    x_vis = _check_last("visual embedding", x_vis, model.d_x)
    s_p = _check_last("proprio", s_p, model.d_p)
    if x_vis.shape[:-1] != s_p.shape[:-1]:
        raise DimensionError("proprio batch", x_vis.shape[:-1], s_p.shape[:-1])
    e = s_p if model.proprio_embedder is None else model.proprio_embedder(s_p)
    return np.concatenate([x_vis.astype(model.dtype), e.astype(model.dtype)], axis=-1)


def encode(model: TcwmModel, x: np.ndarray) -> LatentState:
    """Deterministic linear projection of a joint embedding to the latent."""
    x = _check_last("joint embedding", x, model.joint_dim)
    z = x.astype(model.dtype) if model.projector is None else model.projector(x)
    return LatentState(z=z, d_s=model.d_s, task_idx=tuple(task_indices(model)))


def window_input(model: TcwmModel, z_window: np.ndarray, a_window: np.ndarray) -> np.ndarray:
    """Flatten an (H+1)-step window of latents and actions into one vector."""
    steps = model.history + 1
    z_window = _check_last("latent window", z_window, model.latent_dim)
    a_window = _check_last("action window", a_window, model.d_a)
    if z_window.ndim < 2 or z_window.shape[-2] != steps:
        raise DimensionError("latent window length", steps, z_window.shape[-2] if z_window.ndim > 1 else None)
    if a_window.ndim < 2 or a_window.shape[-2] != steps:
        raise DimensionError("action window length", steps, a_window.shape[-2] if a_window.ndim > 1 else None)
    if z_window.shape[:-1] != a_window.shape[:-1]:
        raise DimensionError("action window batch", z_window.shape[:-1], a_window.shape[:-1])
    joint = np.concatenate([z_window.astype(model.dtype), a_window.astype(model.dtype)], axis=-1)
    return joint.reshape(*joint.shape[:-2], -1)


def predict_next(model: TcwmModel, z_window: np.ndarray, a_window: np.ndarray) -> np.ndarray:
    """Next latent from the last H+1 latents and actions."""
    return model.dynamics(window_input(model, z_window, a_window))


def predict_proprio(model: TcwmModel, z_window: np.ndarray, a_window: np.ndarray) -> np.ndarray:
    """Next standardized proprio from the same window."""
    if model.tc_dynamics is None:
        raise DomainError("direct-embedding models have no proprio dynamics head")
    return model.tc_dynamics(window_input(model, z_window, a_window))


def decode_embedding(model: TcwmModel, z: np.ndarray) -> np.ndarray:
    if model.embed_decoder is None:
        raise DomainError("direct-embedding models have no embedding decoder")
    return model.embed_decoder(_check_last("latent", z, model.latent_dim))


def decode_visual(model: TcwmModel, x_hat: np.ndarray) -> np.ndarray:
    """16x16 image from the visual part of a reconstructed embedding."""
    if model.visual_decoder is None:
        raise DomainError("model was built without a visual decoder")
    x_hat = np.asarray(x_hat)
    out = model.visual_decoder(x_hat[..., : model.d_x])
    return out.reshape(*out.shape[:-1], 16, 16)


def effective_split(model: TcwmModel, threshold: float) -> list[int]:
    """Latent indices whose alignment-head column norm exceeds ``threshold``·max."""
    if model.align_head is None:
        return []
    norms = np.linalg.norm(model.align_head.weight.astype(np.float64), axis=0)
    top = norms.max(initial=0.0)
    if top <= 0:
        return []
    return [int(i) for i in np.flatnonzero(norms > threshold * top)]


def task_indices(model: TcwmModel) -> list[int]:
    """Latent coordinates that form the task block, in ascending order.

    When the alignment head reads the whole latent, the block is the ``d_s``
    coordinates with the largest head column norms, i.e. the ones the l1
    penalty left in use. Otherwise it is the leading ``d_s`` slice the head
    was wired to.
    """
    d_s = model.d_s
    if model.align_head is None or model.config.align_input == "slice":
        return list(range(d_s))
    norms = np.linalg.norm(model.align_head.weight.astype(np.float64), axis=0)
    top = np.argsort(-norms, kind="stable")[:d_s]
    return sorted(int(i) for i in top)


def complement_indices(model: TcwmModel) -> list[int]:
    chosen = set(task_indices(model))
    return [i for i in range(model.latent_dim) if i not in chosen]


def task_block(model: TcwmModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z)[..., task_indices(model)]


def complement_block(model: TcwmModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z)[..., complement_indices(model)]


def encode_observation(model: TcwmModel, x_vis: np.ndarray, s_p_raw: np.ndarray) -> np.ndarray:
    """Standardize raw proprio with the model's stats, embed and encode."""
    stats = model.stats or StandardizationStats.identity(model.d_p)
    return encode(model, embed_joint(model, x_vis, stats.standardize(s_p_raw))).z


def rollout_latents(
    model: TcwmModel,
    z_hist: np.ndarray,
    a_past: np.ndarray,
    actions: np.ndarray,
) -> np.ndarray:
    """Open-loop latents after each action in ``actions``.

    ``z_hist`` holds up to H+1 most recent latents (oldest first) and
    ``a_past`` up to H actions that led to them. Short histories are padded
    by repeating the oldest latent and with zero actions. ``actions`` may
    carry leading candidate axes; the history is shared across them.
    """
    H = model.history
    z_hist = np.atleast_2d(_check_last("latent history", z_hist, model.latent_dim)).astype(model.dtype)
    a_past = np.asarray(a_past, dtype=model.dtype).reshape(-1, model.d_a)
    actions = _check_last("actions", actions, model.d_a).astype(model.dtype)
    if actions.ndim < 2:
        raise DimensionError("action sequence", (..., "T", model.d_a), actions.shape)

    z_hist = z_hist[-(H + 1) :]
    if len(z_hist) < H + 1:
        z_hist = np.concatenate([np.repeat(z_hist[:1], H + 1 - len(z_hist), axis=0), z_hist])
    a_past = a_past[len(a_past) - H :] if H > 0 else a_past[:0]
    if len(a_past) < H:
        a_past = np.concatenate([np.zeros((H - len(a_past), model.d_a), dtype=model.dtype), a_past])

    lead = actions.shape[:-2]
    if actions.shape[-2] == 0:
        return np.zeros((*lead, 0, model.latent_dim), dtype=model.dtype)
    z_win = np.broadcast_to(z_hist, (*lead, H + 1, model.latent_dim)).copy()
    a_hist = np.broadcast_to(a_past, (*lead, H, model.d_a)).copy()
    out = []
    for t in range(actions.shape[-2]):
        a_win = np.concatenate([a_hist, actions[..., t : t + 1, :]], axis=-2)
        z_next = predict_next(model, z_win, a_win)
        out.append(z_next)
        z_win = np.concatenate([z_win[..., 1:, :], z_next[..., None, :]], axis=-2)
        a_hist = a_win[..., 1:, :]
    return np.stack(out, axis=-2)
