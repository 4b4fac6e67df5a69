"""Offline trajectory datasets sampled from synthetic worlds."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from ..core.errors import DimensionError, DomainError
from ..utils.seeding import derive_rng
from .nav import NavEnv, nav_step, render, sample_free_position
from .synth import World, emit_embedding, proprio_of, sample_initial_latent, step_true

logger = logging.getLogger(__name__)

Policy = Literal["uniform-random", "goal-seeking-scripted"]

SCRIPTED_NOISE = 0.3


@dataclass
class TrajectoryBatch:
    """Aligned per-step arrays of several episodes laid end to end.

    ``boundaries`` holds the start offset of every episode. The action at
    step t is the one applied to reach step t+1 of the same episode.
    """

    embeddings: np.ndarray
    proprio: np.ndarray
    actions: np.ndarray
    latents: np.ndarray
    boundaries: list[int]
    renders: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.embeddings.shape[0]
        arrays = {"proprio": self.proprio, "actions": self.actions, "latents": self.latents}
        if self.renders is not None:
            arrays["renders"] = self.renders
        for name, arr in arrays.items():
            if arr.shape[0] != n:
                raise DimensionError(f"{name} length", n, arr.shape[0])
        if self.boundaries and (self.boundaries[0] != 0 or sorted(self.boundaries) != list(self.boundaries)):
            raise DomainError(f"boundaries must start at 0 and increase: {self.boundaries}")
        if self.boundaries and self.boundaries[-1] >= n > 0:
            raise DomainError("last episode is empty")

    @property
    def n_steps(self) -> int:
        return self.embeddings.shape[0]

    @property
    def n_episodes(self) -> int:
        return len(self.boundaries)

    def episode_slices(self) -> list[slice]:
        ends = [*self.boundaries[1:], self.n_steps]
        return [slice(s, e) for s, e in zip(self.boundaries, ends)]

    def select_episodes(self, indices: list[int]) -> "TrajectoryBatch":
        """New batch holding only the given episodes, in the given order."""
        slices = [self.episode_slices()[i] for i in indices]
        take = np.concatenate([np.arange(s.start, s.stop) for s in slices]) if slices else np.zeros(0, dtype=int)
        lengths = [s.stop - s.start for s in slices]
        boundaries = [int(b) for b in np.concatenate([[0], np.cumsum(lengths)[:-1]])] if slices else []
        return TrajectoryBatch(
            embeddings=self.embeddings[take],
            proprio=self.proprio[take],
            actions=self.actions[take],
            latents=self.latents[take],
            boundaries=boundaries,
            renders=None if self.renders is None else self.renders[take],
            meta=dict(self.meta),
        )

    def replace(self, **changes: Any) -> "TrajectoryBatch":
        fields = {
            "embeddings": self.embeddings,
            "proprio": self.proprio,
            "actions": self.actions,
            "latents": self.latents,
            "boundaries": list(self.boundaries),
            "renders": self.renders,
            "meta": dict(self.meta),
        }
        fields.update(changes)
        return TrajectoryBatch(**fields)


def _world_of(source: World | NavEnv) -> World:
    return source.world if isinstance(source, NavEnv) else source


def _scripted_action(source: World | NavEnv, z: np.ndarray, target: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    world = _world_of(source)
    if isinstance(source, NavEnv):
        raw = (target - z[:2]) / source.nav.step_size
    else:
        raw = np.linalg.pinv(world.b_za[: world.d_s]) @ (target - z[: world.d_s])
    raw = raw + SCRIPTED_NOISE * rng.standard_normal(raw.shape)
    return np.clip(raw, world.action_low, world.action_high)


def _new_target(source: World | NavEnv, rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, NavEnv):
        return sample_free_position(source, rng)
    return rng.uniform(-1.0, 1.0, source.d_s)


def _rollout_one(
    source: World | NavEnv, policy: Policy, T: int, rng: np.random.Generator, with_renders: bool
) -> dict[str, np.ndarray]:
    world = _world_of(source)
    nav = source if isinstance(source, NavEnv) else None
    if nav is not None:
        z = np.concatenate([sample_free_position(nav, rng), rng.standard_normal(world.spec.d_c)])
    else:
        z = sample_initial_latent(world, rng)
    target = _new_target(source, rng)

    out: dict[str, list[np.ndarray]] = {"embeddings": [], "proprio": [], "actions": [], "latents": [], "renders": []}
    for _ in range(T):
        out["latents"].append(z)
        out["embeddings"].append(emit_embedding(world, z, rng))
        out["proprio"].append(proprio_of(world, z[: world.d_s]))
        if with_renders and nav is not None:
            out["renders"].append(render(nav, z))
        if policy == "uniform-random":
            a = rng.uniform(world.action_low, world.action_high)
        else:
            reached = np.linalg.norm(z[: len(target)] - target) < 0.1
            if reached:
                target = _new_target(source, rng)
            a = _scripted_action(source, z, target, rng)
        out["actions"].append(a)
        z = nav_step(nav, z, a, rng) if nav is not None else step_true(world, z, a, rng)
    return {k: np.asarray(v) for k, v in out.items() if v}


def generate_dataset(
    source: World | NavEnv,
    policy: Policy,
    n_traj: int,
    T: int,
    seed: int,
    renders: bool = False,
    workers: int = 1,
) -> TrajectoryBatch:
    """``n_traj`` independent rollouts of length ``T``.

    Each trajectory draws from its own stream derived from ``seed``, so the
    result does not depend on ``workers``.
    """
    if n_traj < 1 or T < 1:
        raise DomainError(f"need n_traj >= 1 and T >= 1, got {n_traj}, {T}")
    if renders and not isinstance(source, NavEnv):
        raise DomainError("renders need a navigation environment")

    def one(i: int) -> dict[str, np.ndarray]:
        return _rollout_one(source, policy, T, derive_rng(seed, "traj", i), renders)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_traj)))
    else:
        parts = [one(i) for i in range(n_traj)]

    def stack(key: str) -> np.ndarray:
        return np.concatenate([p[key] for p in parts]).astype(np.float32)

    world = _world_of(source)
    batch = TrajectoryBatch(
        embeddings=stack("embeddings"),
        proprio=stack("proprio"),
        actions=stack("actions"),
        latents=stack("latents"),
        boundaries=[i * T for i in range(n_traj)],
        renders=stack("renders") if renders else None,
        meta={"seed": seed, "policy": policy, "spec": world.spec.model_dump(mode="json")},
    )
    logger.info("generated %d trajectories x %d steps (policy=%s)", n_traj, T, policy)
    return batch
