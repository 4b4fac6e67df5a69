"""Latent-space planners and closed-loop control."""

from .cem import PlanResult, cost, plan_cem, rollout
from .diffusion import (
    LatentDiffusionPlanner,
    LdpPlan,
    NoiseSchedule,
    ddpm_sample,
    ldp_loop,
    ldp_runner,
    plan_ldp,
    train_ldp,
)
from .mpc import (
    EpisodeOutcome,
    ObservationEncoder,
    mpc_loop,
    mpc_runner,
    random_controller,
    random_runner,
    run_episodes,
    success_rate,
    write_episode_log,
)

__all__ = [
    "EpisodeOutcome",
    "LatentDiffusionPlanner",
    "LdpPlan",
    "NoiseSchedule",
    "ObservationEncoder",
    "PlanResult",
    "cost",
    "ddpm_sample",
    "ldp_loop",
    "ldp_runner",
    "mpc_loop",
    "mpc_runner",
    "plan_cem",
    "plan_ldp",
    "random_controller",
    "random_runner",
    "rollout",
    "run_episodes",
    "success_rate",
    "train_ldp",
    "write_episode_log",
]
