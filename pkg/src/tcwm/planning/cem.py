"""Cross-entropy method over action sequences, scored by model rollouts."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import DimensionError, PlannerError
from ..core.models import CemConfig
from ..model.tcwm import TcwmModel, rollout_latents, task_indices
from ..utils.seeding import derive_rng

logger = logging.getLogger(__name__)


@dataclass
class PlanResult:
    """Best action sequence found and how the search got there."""

    actions: np.ndarray
    cost: float
    trace: list[float] = field(default_factory=list)
    executed: int = 1
    prior_cost: float = float("inf")

    @property
    def to_execute(self) -> np.ndarray:
        return self.actions[: self.executed]


def rollout(
    model: TcwmModel,
    z0: np.ndarray,
    actions: np.ndarray,
    a_past: np.ndarray | None = None,
) -> np.ndarray:
    """Predicted latents after each action, starting from ``z0``.

    ``z0`` is a single latent or a short history (oldest first); missing
    history is filled by repeating the oldest latent and zero actions.
    """
    past = np.zeros((0, model.d_a)) if a_past is None else a_past
    return rollout_latents(model, z0, past, actions)


def cost(z_hat: np.ndarray, z_goal: np.ndarray, dims: list[int] | None = None) -> np.ndarray | float:
    """Squared distance to the goal, over ``dims`` if given."""
    diff = np.asarray(z_hat, dtype=np.float64) - np.asarray(z_goal, dtype=np.float64)
    if dims is not None:
        diff = diff[..., dims]
    out = np.sum(diff * diff, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _score(
    model: TcwmModel,
    z_hist: np.ndarray,
    a_past: np.ndarray,
    candidates: np.ndarray,
    z_goal: np.ndarray,
    dims: list[int] | None,
) -> np.ndarray:
    final = rollout(model, z_hist, candidates, a_past)[:, -1]
    costs = np.asarray(cost(final, z_goal, dims), dtype=np.float64)
    return np.where(np.isfinite(costs), costs, np.inf)


def plan_cem(
    model: TcwmModel,
    z0: np.ndarray,
    z_goal: np.ndarray,
    cfg: CemConfig,
    action_low: np.ndarray,
    action_high: np.ndarray,
    a_past: np.ndarray | None = None,
    seed: int | None = None,
) -> PlanResult:
    """Minimise the terminal latent distance to ``z_goal`` over H_p actions.

    The previous elites are carried into every new population ahead of the
    fresh samples, and the prior mean is scored in the first iteration, so
    the elite-mean cost never increases and the result is never worse than
    the prior mean.
    """
    low = np.asarray(action_low, dtype=np.float64)
    high = np.asarray(action_high, dtype=np.float64)
    if low.shape != (model.d_a,) or high.shape != (model.d_a,):
        raise DimensionError("action box", (model.d_a,), low.shape)
    z_goal = np.asarray(z_goal)
    if z_goal.shape != (model.latent_dim,):
        raise DimensionError("goal latent", (model.latent_dim,), z_goal.shape)
    past = np.zeros((0, model.d_a)) if a_past is None else np.asarray(a_past)
    dims = task_indices(model) if cfg.cost_dims == "task" else None
    seed = cfg.seed if seed is None else seed
    shape = (cfg.plan_horizon, model.d_a)

    mu = np.clip(np.zeros(shape), low, high)
    std = np.broadcast_to(cfg.init_std if cfg.init_std is not None else 0.5 * (high - low), shape).copy()
    chunks = max(1, cfg.workers)

    def evaluate(pop: np.ndarray) -> np.ndarray:
        if chunks == 1:
            return _score(model, z0, past, pop, z_goal, dims)
        parts = np.array_split(pop, chunks)
        with ThreadPoolExecutor(max_workers=chunks) as pool:
            scored = list(pool.map(lambda p: _score(model, z0, past, p, z_goal, dims), parts))
        return np.concatenate(scored)

    elites = mu[None]
    best_actions, best_cost = mu.copy(), np.inf
    prior_cost = float("inf")
    trace: list[float] = []
    for it in range(cfg.iterations):
        rng = derive_rng(seed or 0, "cem", it)
        fresh = np.clip(mu + std * rng.standard_normal((cfg.population, *shape)), low, high)
        pop = np.concatenate([elites, fresh])
        costs = evaluate(pop)
        if it == 0:
            prior_cost = float(costs[0])
        if not np.any(np.isfinite(costs)):
            raise PlannerError(f"every candidate had a non-finite cost in iteration {it}")

        order = np.argsort(costs, kind="stable")
        keep = order[: cfg.elites]
        keep = keep[np.isfinite(costs[keep])]
        elites = pop[keep]
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_actions = pop[order[0]].copy()

        mu = elites.mean(axis=0)
        std = np.maximum(elites.std(axis=0), cfg.std_floor)
        if np.all(std <= cfg.std_floor) and it < cfg.iterations / 2:
            std = np.full(shape, cfg.reinflate_std)
        trace.append(float(costs[keep].mean()))
        logger.debug("cem iteration %d: elite mean cost %.5f, best %.5f", it, trace[-1], best_cost)

    return PlanResult(
        actions=best_actions,
        cost=best_cost,
        trace=trace,
        executed=cfg.execute_horizon,
        prior_cost=prior_cost,
    )
