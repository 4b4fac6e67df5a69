"""Planar point-mass navigation with walls, goal and a tiny rasterizer."""

from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DomainError
from ..core.models import NavSpec, WallRect, WorldSpec
from .synth import World, build_world, step_true

RENDER_SIZE = 16
WALL_INTENSITY = 0.5
GOAL_INTENSITY = 0.3


@dataclass
class NavEnv:
    """World whose task block is a 2-D position inside [-bound, bound]^2."""

    world: World
    nav: NavSpec
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def walls(self) -> list[WallRect]:
        return self.nav.walls

    @property
    def bound(self) -> float:
        return self.nav.bound


def build_nav_env(spec: WorldSpec, nav: NavSpec | None = None, goal: np.ndarray | None = None) -> NavEnv:
    if spec.d_s != 2 or spec.d_a != 2:
        raise DomainError(f"navigation needs d_s = d_a = 2, got d_s={spec.d_s}, d_a={spec.d_a}")
    nav = nav or NavSpec()
    world = build_world(spec, control_matrix=nav.step_size * np.eye(2))
    env = NavEnv(world=world, nav=nav, goal=np.zeros(2) if goal is None else np.asarray(goal, dtype=np.float64))
    if not in_bounds(env, env.goal):
        raise DomainError(f"goal {env.goal} outside bounds")
    return env


def in_bounds(env: NavEnv, pos: np.ndarray) -> bool:
    return bool(np.all(np.abs(pos) <= env.bound))


def inside_wall(env: NavEnv, pos: np.ndarray) -> bool:
    """True if ``pos`` lies strictly inside any wall."""
    x, y = pos
    return any(w.x0 < x < w.x1 and w.y0 < y < w.y1 for w in env.walls)


def resolve_motion(env: NavEnv, pos: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Move from ``pos`` toward ``target`` one axis at a time, stopping at walls and bounds."""
    x, y = float(pos[0]), float(pos[1])
    nx = float(np.clip(target[0], -env.bound, env.bound))
    for w in env.walls:
        if w.y0 < y < w.y1:
            if x <= w.x0 < nx:
                nx = w.x0
            elif nx < w.x1 <= x:
                nx = w.x1
    ny = float(np.clip(target[1], -env.bound, env.bound))
    for w in env.walls:
        if w.x0 < nx < w.x1:
            if y <= w.y0 < ny:
                ny = w.y0
            elif ny < w.y1 <= y:
                ny = w.y1
    return np.array([nx, ny])


def nav_step(env: NavEnv, z: np.ndarray, a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One true transition; the position never passes through a wall."""
    nxt = step_true(env.world, z, a, rng)
    nxt[:2] = resolve_motion(env, np.asarray(z[:2], dtype=np.float64), nxt[:2])
    return nxt


def at_goal(env: NavEnv, z: np.ndarray) -> bool:
    return bool(np.linalg.norm(np.asarray(z[:2]) - env.goal) <= env.nav.goal_tolerance)


def sample_free_position(env: NavEnv, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
    """Uniform position inside the bounds and clear of every wall."""
    lim = env.bound - margin
    for _ in range(10_000):
        pos = rng.uniform(-lim, lim, 2)
        clear = all(
            not (w.x0 - margin < pos[0] < w.x1 + margin and w.y0 - margin < pos[1] < w.y1 + margin)
            for w in env.walls
        )
        if clear:
            return pos
    raise DomainError("could not sample a free position; walls cover the arena")


def sample_episode(env: NavEnv, rng: np.random.Generator, min_distance: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """Start latent and goal position for one episode."""
    start = sample_free_position(env, rng)
    goal = sample_free_position(env, rng)
    while np.linalg.norm(goal - start) < min_distance:
        goal = sample_free_position(env, rng)
    z0 = np.concatenate([start, rng.standard_normal(env.world.spec.d_c)])
    return z0, goal


def _pixel_centers(bound: float) -> tuple[np.ndarray, np.ndarray]:
    cell = 2.0 * bound / RENDER_SIZE
    cols = -bound + (np.arange(RENDER_SIZE) + 0.5) * cell
    rows = bound - (np.arange(RENDER_SIZE) + 0.5) * cell
    xs, ys = np.meshgrid(cols, rows)
    return xs, ys


def render(env: NavEnv, z: np.ndarray) -> np.ndarray:
    """16x16 grayscale image of walls, goal and agent; values in [0, 1]."""
    pos = np.asarray(z[:2], dtype=np.float64)
    if not in_bounds(env, pos):
        raise DomainError(f"agent position {pos} outside bounds")
    xs, ys = _pixel_centers(env.bound)
    cell = 2.0 * env.bound / RENDER_SIZE
    half = 0.5 * cell

    image = np.zeros((RENDER_SIZE, RENDER_SIZE))
    for w in env.walls:
        mask = (xs > w.x0 - half) & (xs < w.x1 + half) & (ys > w.y0 - half) & (ys < w.y1 + half)
        image[mask] = np.maximum(image[mask], WALL_INTENSITY)

    sigma = env.nav.agent_sigma_px * cell
    goal_blob = GOAL_INTENSITY * np.exp(-((xs - env.goal[0]) ** 2 + (ys - env.goal[1]) ** 2) / (2 * sigma**2))
    agent_blob = np.exp(-((xs - pos[0]) ** 2 + (ys - pos[1]) ** 2) / (2 * sigma**2))
    image = np.maximum(image, goal_blob)
    image = np.maximum(image, agent_blob)
    return np.clip(image, 0.0, 1.0)
