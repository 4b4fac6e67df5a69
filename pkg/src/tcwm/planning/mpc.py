"""Closed-loop receding-horizon control in the navigation world."""

import csv
import dataclasses
import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ..core.models import CemConfig
from ..model.tcwm import TcwmModel, encode_observation
from ..utils.seeding import derive_rng
from ..world.nav import NavEnv, at_goal, nav_step, sample_episode
from ..world.synth import emit_embedding, mix, proprio_of
from .cem import plan_cem

logger = logging.getLogger(__name__)

# (latent history, past actions, goal latent, step) -> (actions to run, planned cost)
PlanFn = Callable[[np.ndarray, np.ndarray, np.ndarray, int], tuple[np.ndarray, float]]


class StepRecord(BaseModel):
    step: int
    x: float
    y: float
    cost: float | None = None


class EpisodeOutcome(BaseModel):
    episode: int = 0
    success: bool
    steps: int
    trajectory: list[StepRecord]


class ObservationEncoder:
    """Turns true navigation states into model latents via synthetic observations."""

    def __init__(self, env: NavEnv, model: TcwmModel, rng: np.random.Generator) -> None:
        self.env = env
        self.model = model
        self.rng = rng

    def observe(self, z_true: np.ndarray) -> np.ndarray:
        world = self.env.world
        x = emit_embedding(world, z_true, self.rng)
        s_p = proprio_of(world, z_true[: world.d_s])
        return encode_observation(self.model, x, s_p)

    def goal_latent(self, goal: np.ndarray | None = None) -> np.ndarray:
        """Noise-free observation of the goal position, distractors at their mean."""
        world = self.env.world
        pos = self.env.goal if goal is None else np.asarray(goal)
        z = np.concatenate([pos, np.zeros(world.spec.d_c)])
        return encode_observation(self.model, mix(world, z), proprio_of(world, pos))


def closed_loop(
    env: NavEnv,
    encoder: ObservationEncoder,
    plan_fn: PlanFn,
    z0: np.ndarray,
    max_steps: int,
    rng: np.random.Generator,
    episode: int = 0,
) -> EpisodeOutcome:
    """Plan, run the first planned actions on the true env, re-encode, repeat."""
    H = encoder.model.history
    z = np.asarray(z0, dtype=np.float64)
    trajectory = [StepRecord(step=0, x=float(z[0]), y=float(z[1]))]
    if at_goal(env, z):
        return EpisodeOutcome(episode=episode, success=True, steps=0, trajectory=trajectory)

    z_goal = encoder.goal_latent()
    history = [encoder.observe(z)]
    past: list[np.ndarray] = []
    step = 0
    while step < max_steps:
        hist = np.stack(history[-(H + 1) :])
        a_past = np.array(past[-H:]) if H > 0 and past else np.zeros((0, env.world.spec.d_a))
        actions, planned = plan_fn(hist, a_past, z_goal, step)
        for a in actions:
            z = nav_step(env, z, a, rng)
            step += 1
            past.append(np.asarray(a))
            history.append(encoder.observe(z))
            trajectory.append(StepRecord(step=step, x=float(z[0]), y=float(z[1]), cost=planned))
            if at_goal(env, z):
                logger.info("episode %d reached the goal in %d steps", episode, step)
                return EpisodeOutcome(episode=episode, success=True, steps=step, trajectory=trajectory)
            if step >= max_steps:
                break
    logger.info("episode %d timed out after %d steps", episode, step)
    return EpisodeOutcome(episode=episode, success=False, steps=step, trajectory=trajectory)


def mpc_loop(
    env: NavEnv,
    model: TcwmModel,
    encoder: ObservationEncoder,
    cfg: CemConfig,
    max_steps: int,
    z0: np.ndarray,
    rng: np.random.Generator,
    episode: int = 0,
) -> EpisodeOutcome:
    """CEM-MPC episode toward ``env.goal``."""
    world = env.world

    def plan(hist: np.ndarray, a_past: np.ndarray, z_goal: np.ndarray, step: int) -> tuple[np.ndarray, float]:
        seed = int(derive_rng(cfg.seed or 0, "mpc", episode, step).integers(2**31))
        result = plan_cem(model, hist, z_goal, cfg, world.action_low, world.action_high, a_past, seed=seed)
        return result.to_execute, result.cost

    return closed_loop(env, encoder, plan, z0, max_steps, rng, episode)


def random_controller(
    env: NavEnv, z0: np.ndarray, max_steps: int, rng: np.random.Generator, episode: int = 0
) -> EpisodeOutcome:
    """Baseline: uniform random actions from the action box."""
    world = env.world
    z = np.asarray(z0, dtype=np.float64)
    trajectory = [StepRecord(step=0, x=float(z[0]), y=float(z[1]))]
    if at_goal(env, z):
        return EpisodeOutcome(episode=episode, success=True, steps=0, trajectory=trajectory)
    for step in range(1, max_steps + 1):
        z = nav_step(env, z, rng.uniform(world.action_low, world.action_high), rng)
        trajectory.append(StepRecord(step=step, x=float(z[0]), y=float(z[1])))
        if at_goal(env, z):
            return EpisodeOutcome(episode=episode, success=True, steps=step, trajectory=trajectory)
    return EpisodeOutcome(episode=episode, success=False, steps=max_steps, trajectory=trajectory)


EpisodeRunner = Callable[[NavEnv, np.ndarray, np.random.Generator, int], EpisodeOutcome]


def run_episodes(env: NavEnv, runner: EpisodeRunner, episodes: int, seed: int) -> list[EpisodeOutcome]:
    """Run ``episodes`` start/goal pairs; pair i is the same for every runner."""
    outcomes = []
    for i in range(episodes):
        z0, goal = sample_episode(env, derive_rng(seed, "episode", i))
        episode_env = dataclasses.replace(env, goal=goal)
        outcomes.append(runner(episode_env, z0, derive_rng(seed, "dynamics", i), i))
    return outcomes


def success_rate(outcomes: list[EpisodeOutcome]) -> float:
    return float(np.mean([o.success for o in outcomes])) if outcomes else 0.0


def write_episode_log(outcomes: list[EpisodeOutcome], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["episode", "step", "x", "y", "cost", "success"])
        for o in outcomes:
            for rec in o.trajectory:
                writer.writerow([o.episode, rec.step, rec.x, rec.y, "" if rec.cost is None else rec.cost, int(o.success)])


def mpc_runner(model: TcwmModel, cfg: CemConfig, max_steps: int, seed: int) -> EpisodeRunner:
    def run(env: NavEnv, z0: np.ndarray, rng: np.random.Generator, episode: int) -> EpisodeOutcome:
        encoder = ObservationEncoder(env, model, derive_rng(seed, "observation", episode))
        return mpc_loop(env, model, encoder, cfg, max_steps, z0, rng, episode)

    return run


def random_runner(max_steps: int) -> EpisodeRunner:
    def run(env: NavEnv, z0: np.ndarray, rng: np.random.Generator, episode: int) -> EpisodeOutcome:
        return random_controller(env, z0, max_steps, rng, episode)

    return run
