"""Latent diffusion planner: a DDPM over future latent trajectories plus a
diffusion inverse-dynamics model that turns latent pairs into actions."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel

from ..core.errors import DomainError, NumericError, PlannerError, TrainingError
from ..core.models import DiffusionConfig
from ..model.tcwm import TcwmModel
from ..numerics import AdamState, MlpNet, adam_step
from ..training.losses import mse
from ..utils.seeding import derive_rng
from ..world.nav import NavEnv
from .mpc import EpisodeOutcome, EpisodeRunner, ObservationEncoder, closed_loop

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-6


@dataclass
class NoiseSchedule:
    """Linear beta schedule and the quantities DDPM derives from it."""

    betas: np.ndarray

    @classmethod
    def linear(cls, steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> "NoiseSchedule":
        if steps < 1:
            raise DomainError(f"need at least one diffusion step, got {steps}")
        if not 0 < beta_start <= beta_end < 1:
            raise DomainError(f"invalid beta range [{beta_start}, {beta_end}]")
        return cls(betas=np.linspace(beta_start, beta_end, steps))

    @property
    def steps(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def q_sample(self, x0: np.ndarray, t: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Noised sample x_t for integer steps ``t`` (one per row)."""
        ab = self.alpha_bars[np.asarray(t)].reshape(-1, *([1] * (x0.ndim - 1)))
        return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


EpsFn = Callable[[np.ndarray, int], np.ndarray]


def ddpm_sample(schedule: NoiseSchedule, eps_fn: EpsFn, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Ancestral sampling from pure noise down to step 0."""
    x = rng.standard_normal(shape)
    alphas, alpha_bars, betas = schedule.alphas, schedule.alpha_bars, schedule.betas
    for t in range(schedule.steps - 1, -1, -1):
        eps = np.asarray(eps_fn(x, t), dtype=np.float64)
        x = (x - betas[t] / np.sqrt(1.0 - alpha_bars[t]) * eps) / np.sqrt(alphas[t])
        if t > 0:
            x = x + np.sqrt(betas[t]) * rng.standard_normal(shape)
    return x


def time_features(t: np.ndarray, steps: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding of diffusion steps, shape (len(t), dim)."""
    half = dim // 2
    freqs = np.exp(-np.log(10_000.0) * np.arange(half) / max(half, 1))
    angles = (np.asarray(t, dtype=np.float64)[:, None] / steps) * 1000.0 * freqs[None, :]
    feats = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if feats.shape[1] < dim:
        feats = np.pad(feats, ((0, 0), (0, dim - feats.shape[1])))
    return feats


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "Normalizer":
        values = np.asarray(values, dtype=np.float64)
        return cls(mean=values.mean(axis=0), std=np.maximum(values.std(axis=0), STD_FLOOR))

    def forward(self, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v) - self.mean) / self.std

    def inverse(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v) * self.std + self.mean


class LdpReport(BaseModel):
    denoiser_loss: list[float] = []
    idm_loss: list[float] = []


@dataclass
class LatentDiffusionPlanner:
    """Trained denoiser and inverse-dynamics nets with their normalisers."""

    config: DiffusionConfig
    schedule: NoiseSchedule
    denoiser: MlpNet
    idm: MlpNet
    z_norm: Normalizer
    a_norm: Normalizer
    latent_dim: int
    d_a: int

    @property
    def horizon(self) -> int:
        return self.config.horizon

    def denoiser_input(self, x_t: np.ndarray, z_k: np.ndarray, z_goal: np.ndarray | None, t: np.ndarray) -> np.ndarray:
        parts = [x_t.reshape(len(x_t), -1), z_k]
        if self.config.goal_conditioned:
            parts.append(z_goal)
        parts.append(time_features(t, self.schedule.steps, self.config.time_features))
        return np.concatenate(parts, axis=1)

    def idm_input(self, a_t: np.ndarray, z_k: np.ndarray, z_next: np.ndarray, t: np.ndarray) -> np.ndarray:
        feats = time_features(t, self.schedule.steps, self.config.time_features)
        return np.concatenate([a_t, z_k, z_next, feats], axis=1)


def _training_samples(
    latents: list[np.ndarray], actions: list[np.ndarray], horizon: int
) -> tuple[list[tuple[int, int]], np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory start points and (z_k, z_k+1, a_k) transition triples."""
    starts = [(e, k) for e, z in enumerate(latents) for k in range(len(z) - horizon)]
    z_k = np.concatenate([z[:-1] for z in latents])
    z_next = np.concatenate([z[1:] for z in latents])
    a_k = np.concatenate([a[:-1] for a in actions])
    return starts, z_k, z_next, a_k


def train_ldp(
    latents: list[np.ndarray],
    actions: list[np.ndarray],
    cfg: DiffusionConfig,
) -> tuple[LatentDiffusionPlanner, LdpReport]:
    """Fit the trajectory denoiser and the inverse-dynamics model.

    ``latents[e]`` and ``actions[e]`` are the encoded latents and actions of
    episode e; action k leads from latent k to latent k+1. Goals are drawn
    from later steps of the same episode.
    """
    if len(latents) != len(actions) or not latents:
        raise DomainError("need one action array per latent episode")
    H = cfg.horizon
    starts, z_k, z_next, a_k = _training_samples(latents, actions, H)
    if not starts:
        raise DomainError(f"no episode is longer than the planning horizon {H}")
    seed = cfg.seed or 0
    L = latents[0].shape[1]
    d_a = actions[0].shape[1]
    z_norm = Normalizer.fit(np.concatenate(latents))
    a_norm = Normalizer.fit(a_k)
    schedule = NoiseSchedule.linear(cfg.steps, cfg.beta_start, cfg.beta_end)

    den_in = H * L + L + (L if cfg.goal_conditioned else 0) + cfg.time_features
    idm_in = d_a + 2 * L + cfg.time_features
    planner = LatentDiffusionPlanner(
        config=cfg,
        schedule=schedule,
        denoiser=MlpNet.init([den_in, *cfg.hidden, H * L], derive_rng(seed, "ldp", "denoiser"), dtype=np.float64),
        idm=MlpNet.init([idm_in, *cfg.idm_hidden, d_a], derive_rng(seed, "ldp", "idm"), dtype=np.float64),
        z_norm=z_norm,
        a_norm=a_norm,
        latent_dim=L,
        d_a=d_a,
    )
    normed = [z_norm.forward(z) for z in latents]
    zk_n, zn_n, ak_n = z_norm.forward(z_k), z_norm.forward(z_next), a_norm.forward(a_k)

    den_params = planner.denoiser.named_parameters()
    idm_params = planner.idm.named_parameters()
    den_state = AdamState.for_params(den_params, lr=cfg.lr)
    idm_state = AdamState.for_params(idm_params, lr=cfg.lr)
    report = LdpReport()

    for epoch in range(cfg.epochs):
        rng = derive_rng(seed, "ldp", "epoch", epoch)
        den_losses, idm_losses = [], []
        order = rng.permutation(len(starts))
        for b, lo in enumerate(range(0, len(starts), cfg.batch_size)):
            chunk = [starts[i] for i in order[lo : lo + cfg.batch_size]]
            cond = np.stack([normed[e][k] for e, k in chunk])
            target = np.stack([normed[e][k + 1 : k + 1 + H] for e, k in chunk])
            goal = np.stack([normed[e][rng.integers(k + H, len(normed[e]))] for e, k in chunk])
            t = rng.integers(0, schedule.steps, len(chunk))
            eps = rng.standard_normal(target.shape)
            x_in = planner.denoiser_input(schedule.q_sample(target, t, eps), cond, goal, t)
            out, cache = planner.denoiser.forward_cache(x_in)
            loss, d_out = mse(out, eps.reshape(len(chunk), -1))
            den_losses.append(loss)
            try:
                grads, _ = planner.denoiser.backward(cache, d_out)
                adam_step(den_state, den_params, planner.denoiser.grads_to_dict(grads))
            except NumericError as e:
                raise TrainingError(f"denoiser: {e}", epoch, b) from e
            if not np.isfinite(loss):
                raise TrainingError("denoiser loss is non-finite", epoch, b)

        perm = rng.permutation(len(a_k))
        for b, lo in enumerate(range(0, len(a_k), cfg.batch_size)):
            idx = perm[lo : lo + cfg.batch_size]
            t = rng.integers(0, schedule.steps, len(idx))
            eps = rng.standard_normal((len(idx), d_a))
            x_in = planner.idm_input(schedule.q_sample(ak_n[idx], t, eps), zk_n[idx], zn_n[idx], t)
            out, cache = planner.idm.forward_cache(x_in)
            loss, d_out = mse(out, eps)
            idm_losses.append(loss)
            try:
                grads, _ = planner.idm.backward(cache, d_out)
                adam_step(idm_state, idm_params, planner.idm.grads_to_dict(grads))
            except NumericError as e:
                raise TrainingError(f"inverse dynamics: {e}", epoch, b) from e
            if not np.isfinite(loss):
                raise TrainingError("inverse dynamics loss is non-finite", epoch, b)

        report.denoiser_loss.append(float(np.mean(den_losses)))
        report.idm_loss.append(float(np.mean(idm_losses)))
        logger.info("ldp epoch %d: denoiser=%.4f idm=%.4f", epoch, report.denoiser_loss[-1], report.idm_loss[-1])
    return planner, report


@dataclass
class LdpPlan:
    latents: np.ndarray
    actions: np.ndarray
    executed: int

    @property
    def to_execute(self) -> np.ndarray:
        return self.actions[: self.executed]


def plan_ldp(
    planner: LatentDiffusionPlanner,
    z_t: np.ndarray,
    z_goal: np.ndarray | None,
    rng: np.random.Generator,
    action_low: np.ndarray | None = None,
    action_high: np.ndarray | None = None,
) -> LdpPlan:
    """Sample H future latents given ``z_t``, then decode an action per latent pair."""
    H, L = planner.horizon, planner.latent_dim
    cond = planner.z_norm.forward(np.asarray(z_t, dtype=np.float64))[None]
    goal = planner.z_norm.forward(np.asarray(z_goal, dtype=np.float64))[None] if z_goal is not None else None
    if planner.config.goal_conditioned and goal is None:
        raise PlannerError("goal-conditioned planner needs a goal latent")

    def denoise(x: np.ndarray, t: int) -> np.ndarray:
        return planner.denoiser(planner.denoiser_input(x, cond, goal, np.array([t]))).reshape(x.shape)

    traj_n = ddpm_sample(planner.schedule, denoise, (1, H, L), rng)[0]
    if not np.all(np.isfinite(traj_n)):
        raise PlannerError("latent trajectory sample is non-finite")

    prev = np.concatenate([cond, traj_n[:-1]])
    actions_n = []
    for k in range(H):
        zk, zn = prev[k : k + 1], traj_n[k : k + 1]

        def denoise_action(x: np.ndarray, t: int, zk: np.ndarray = zk, zn: np.ndarray = zn) -> np.ndarray:
            return planner.idm(planner.idm_input(x, zk, zn, np.array([t])))

        actions_n.append(ddpm_sample(planner.schedule, denoise_action, (1, planner.d_a), rng)[0])
    actions = planner.a_norm.inverse(np.stack(actions_n))
    if not np.all(np.isfinite(actions)):
        raise PlannerError("action sample is non-finite")
    if action_low is not None and action_high is not None:
        actions = np.clip(actions, action_low, action_high)
    return LdpPlan(
        latents=planner.z_norm.inverse(traj_n),
        actions=actions,
        executed=min(planner.config.execute_horizon, H),
    )


def ldp_loop(
    env: NavEnv,
    planner: LatentDiffusionPlanner,
    encoder: ObservationEncoder,
    max_steps: int,
    z0: np.ndarray,
    rng: np.random.Generator,
    episode: int = 0,
    seed: int = 0,
) -> EpisodeOutcome:
    """Closed-loop episode that replans with the diffusion planner after H_a steps."""
    world = env.world

    def plan(hist: np.ndarray, a_past: np.ndarray, z_goal: np.ndarray, step: int) -> tuple[np.ndarray, float]:
        result = plan_ldp(
            planner, hist[-1], z_goal, derive_rng(seed, "ldp-plan", episode, step), world.action_low, world.action_high
        )
        gap = result.latents[-1] - z_goal
        return result.to_execute, float(np.sum(gap * gap))

    return closed_loop(env, encoder, plan, z0, max_steps, rng, episode)


def ldp_runner(model: TcwmModel, planner: LatentDiffusionPlanner, max_steps: int, seed: int) -> EpisodeRunner:
    def run(env: NavEnv, z0: np.ndarray, rng: np.random.Generator, episode: int) -> EpisodeOutcome:
        encoder = ObservationEncoder(env, model, derive_rng(seed, "observation", episode))
        return ldp_loop(env, planner, encoder, max_steps, z0, rng, episode, seed)

    return run
