"""Synthetic ground-truth worlds standing in for frozen foundation embeddings."""

from .dataset import TrajectoryBatch, generate_dataset
from .nav import NavEnv, at_goal, build_nav_env, nav_step, render, resolve_motion, sample_episode
from .synth import World, build_world, emit_embedding, invert_proprio, mix, proprio_of, step_true

__all__ = [
    "NavEnv",
    "TrajectoryBatch",
    "World",
    "at_goal",
    "build_nav_env",
    "build_world",
    "emit_embedding",
    "generate_dataset",
    "invert_proprio",
    "mix",
    "nav_step",
    "proprio_of",
    "render",
    "resolve_motion",
    "sample_episode",
    "step_true",
]
