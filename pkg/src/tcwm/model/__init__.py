"""Task-centric world model."""

from .checkpoint import checkpoint_experiment, load_checkpoint, save_checkpoint
from .tcwm import (
    LatentState,
    TcwmModel,
    complement_block,
    complement_indices,
    decode_embedding,
    decode_visual,
    effective_split,
    embed_joint,
    encode,
    encode_observation,
    predict_next,
    predict_proprio,
    rollout_latents,
    task_block,
    task_indices,
    window_input,
)

__all__ = [
    "LatentState",
    "TcwmModel",
    "checkpoint_experiment",
    "complement_block",
    "complement_indices",
    "decode_embedding",
    "decode_visual",
    "effective_split",
    "embed_joint",
    "encode",
    "encode_observation",
    "load_checkpoint",
    "predict_next",
    "predict_proprio",
    "rollout_latents",
    "save_checkpoint",
    "task_block",
    "task_indices",
    "window_input",
]
