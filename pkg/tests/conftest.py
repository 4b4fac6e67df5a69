"""Shared fixtures: a tiny world, a small dataset and hand-wired models."""

import numpy as np
import pytest

from tcwm.core.datastore import StandardizationStats
from tcwm.core.models import ModelConfig, NavSpec, WorldSpec
from tcwm.model import TcwmModel
from tcwm.world import NavEnv, TrajectoryBatch, World, build_nav_env, build_world, generate_dataset


@pytest.fixture
def small_spec() -> WorldSpec:
    return WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, seed=0)


@pytest.fixture
def small_world(small_spec: WorldSpec) -> World:
    return build_world(small_spec)


@pytest.fixture
def small_batch(small_world: World) -> TrajectoryBatch:
    return generate_dataset(small_world, "uniform-random", n_traj=6, T=12, seed=0)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(d_z=4, d_s=2, history=1, hidden=[8])


@pytest.fixture
def open_nav() -> NavEnv:
    """Navigation arena without walls."""
    return build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, seed=0), NavSpec(walls=[]))


def _position_model(d_x: int, step_size: float = 0.1) -> TcwmModel:
    """Model whose latent is the proprio (planar position) and whose dynamics are exact: z' = z + step·a."""
    config = ModelConfig(d_z=2, d_s=2, history=0, hidden=[])
    model = TcwmModel.create(d_x=d_x, d_p=2, d_a=2, config=config, dtype=np.float64)
    model.proprio_embedder.weight[...] = np.eye(2)
    model.proprio_embedder.bias[...] = 0.0
    model.projector.weight[...] = 0.0
    model.projector.weight[:, d_x:] = np.eye(2)
    model.projector.bias[...] = 0.0
    layer = model.dynamics.layers[0]
    layer.weight[...] = np.hstack([np.eye(2), step_size * np.eye(2)])
    layer.bias[...] = 0.0
    model.stats = StandardizationStats.identity(2)
    return model


@pytest.fixture
def position_model():
    return _position_model
