"""End-to-end experiment steps shared by the CLI commands."""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from .core.config import OutputLayout, deep_merge, load_preset, validate_config
from .core.datastore import load_dataset, split_episodes
from .core.errors import ConfigError, DomainError, MissingFileError
from .core.models import EvalConfig, ExperimentConfig, PlannerSection, WorldSection
from .evaluation import (
    AssumptionReport,
    CollapseMetrics,
    ProbeResult,
    RobustnessResult,
    assumption_report,
    check_a4,
    encode_batch,
    linear_probe,
    robustness_drop,
    rollout_mse,
    task_centric_recovery,
    visual_fidelity,
)
from .model import (
    TcwmModel,
    checkpoint_experiment,
    complement_block,
    effective_split,
    load_checkpoint,
    task_block,
)
from .planning import (
    EpisodeOutcome,
    ldp_runner,
    mpc_runner,
    random_runner,
    run_episodes,
    success_rate,
    train_ldp,
)
from .training import TrainReport, train
from .utils.seeding import derive_rng
from .world import NavEnv, TrajectoryBatch, World, build_nav_env, build_world, generate_dataset

logger = logging.getLogger(__name__)


def build_source(section: WorldSection) -> World | NavEnv:
    if section.kind == "nav":
        return build_nav_env(section.world_spec(), section.nav)
    return build_world(section.world_spec())


def generate(config: ExperimentConfig) -> TrajectoryBatch:
    section = config.world
    return generate_dataset(
        build_source(section),
        section.policy,
        section.n_traj,
        section.traj_len,
        seed=section.seed or 0,
        renders=section.renders,
        workers=section.workers,
    )


def resolve_dataset(path: Path) -> TrajectoryBatch:
    """Load a dataset from ``path`` or from the dataset directory under it."""
    path = Path(path)
    if (path / "meta.json").exists():
        return load_dataset(path)
    layout = OutputLayout(path)
    if layout.has_dataset():
        return load_dataset(layout.dataset_path)
    raise MissingFileError(f"no dataset at {path}")


def resolve_checkpoint(path: Path) -> tuple[TcwmModel, ExperimentConfig | None]:
    """Load a checkpoint and the experiment config it was trained with."""
    path = Path(path)
    if not (path / "meta.json").exists():
        layout = OutputLayout(path)
        if not layout.has_checkpoint():
            raise MissingFileError(f"no checkpoint at {path}")
        path = layout.checkpoint_path
    model = load_checkpoint(path)
    snapshot = checkpoint_experiment(path)
    return model, validate_config(snapshot) if snapshot is not None else None


def fit_model(config: ExperimentConfig, dataset: TrajectoryBatch) -> tuple[TcwmModel, TrainReport]:
    model = TcwmModel.create(
        d_x=dataset.embeddings.shape[1],
        d_p=dataset.proprio.shape[1],
        d_a=dataset.actions.shape[1],
        config=config.model,
        seed=config.training.seed or 0,
    )
    return train(model, dataset, config.training)


class ProbeSummary(BaseModel):
    """Everything ``probe`` measures on one model and dataset."""

    probes: list[ProbeResult]
    effective_rank: float
    latent_variances: list[float]
    effective_split: list[int]
    recovery_r2: float | None = None
    ssim: float | None = None
    rollout_mse: list[float] = []
    robustness: list[RobustnessResult] = []


def probe_suite(model: TcwmModel, batch: TrajectoryBatch, cfg: EvalConfig, seed: int = 0) -> ProbeSummary:
    Z = encode_batch(model, batch)
    z_s, z_c = task_block(model, Z), complement_block(model, Z)
    spec = batch.meta.get("spec") or {}
    d_s_true = int(spec.get("d_s", model.d_s))
    true_c = batch.latents[:, d_s_true:]
    folds, alpha = cfg.probe_folds, cfg.ridge_alpha

    probes = [
        linear_probe(z_s, batch.proprio, folds, alpha, label="z_s", seed=seed),
        linear_probe(Z, batch.proprio, folds, alpha, label="full-z", seed=seed),
        linear_probe(batch.embeddings, batch.proprio, folds, alpha, label="raw-embedding", seed=seed),
    ]
    if z_c.shape[1] > 0:
        probes.append(linear_probe(z_c, batch.proprio, folds, alpha, label="z_c", seed=seed))
    if true_c.shape[1] > 0:
        probes.append(linear_probe(Z, true_c, folds, alpha, label="full-z", seed=seed, target="true-complement"))
        if z_c.shape[1] > 0:
            probes.append(linear_probe(z_c, true_c, folds, alpha, label="z_c", seed=seed, target="true-complement"))

    collapse = CollapseMetrics.of(Z)
    summary = ProbeSummary(
        probes=probes,
        effective_rank=collapse.effective_rank,
        latent_variances=collapse.variances.tolist(),
        effective_split=effective_split(model, cfg.split_threshold),
        ssim=visual_fidelity(model, batch),
    )
    if z_s.shape[0] > z_s.shape[1] + 1:
        summary.recovery_r2 = task_centric_recovery(model, batch, d_s_true).r2
    try:
        summary.rollout_mse = rollout_mse(model, batch, cfg.rollout_horizon)
    except DomainError as e:
        logger.warning("skipping rollout error: %s", e)
    if cfg.robustness and batch.n_episodes > 1:
        rng = derive_rng(seed, "robustness")
        summary.robustness = [
            robustness_drop(model, batch, kind, rng, alpha) for kind in ("gauss-noise", "channel-jitter")
        ]
    return summary


def verify(
    model: TcwmModel, batch: TrajectoryBatch, cfg: EvalConfig, eval_fraction: float = 0.2, seed: int = 0
) -> AssumptionReport:
    """Assumption checks on the evaluation episodes (the trailing ``eval_fraction``)."""
    _, held_out = split_episodes(batch, eval_fraction)
    return assumption_report(
        model,
        held_out or batch,
        a1_pairs=cfg.a1_pairs,
        a1_delta=cfg.a1_delta,
        a2_pairs=cfg.a2_pairs,
        folds=cfg.probe_folds,
        alpha=cfg.ridge_alpha,
        seed=seed,
    )


class PlanSummary(BaseModel):
    planner: str
    episodes: int
    success_rate: float
    random_success_rate: float
    mean_steps: float


def plan_episodes(
    config: ExperimentConfig,
    model: TcwmModel,
    dataset: TrajectoryBatch | None = None,
    episodes: int | None = None,
) -> tuple[PlanSummary, list[EpisodeOutcome]]:
    """Closed-loop episodes in the navigation world with the configured planner and a random baseline."""
    if config.world.kind != "nav":
        raise ConfigError("planning runs in the navigation world; use a config with world.kind = nav", ["world.kind"])
    env = build_nav_env(config.world.world_spec(), config.world.nav)
    section: PlannerSection = config.planner
    n = episodes or section.episodes
    seed = config.seed

    if section.kind == "ldp":
        if dataset is None:
            raise MissingFileError("the diffusion planner needs --data to fit on")
        Z = encode_batch(model, dataset)
        slices = dataset.episode_slices()
        planner, _ = train_ldp([Z[s] for s in slices], [dataset.actions[s] for s in slices], section.diffusion)
        runner = ldp_runner(model, planner, section.max_steps, seed)
    else:
        runner = mpc_runner(model, section.cem, section.max_steps, seed)

    outcomes = run_episodes(env, runner, n, seed)
    baseline = run_episodes(env, random_runner(section.max_steps), n, seed)
    summary = PlanSummary(
        planner=section.kind,
        episodes=n,
        success_rate=success_rate(outcomes),
        random_success_rate=success_rate(baseline),
        mean_steps=float(np.mean([o.steps for o in outcomes])),
    )
    return summary, outcomes


ABLATION_PRESETS = ("no-rec", "no-align", "direct-embedding", "split-sweep")
SPLIT_SWEEP = (2, 4, 8)


class AblationRow(BaseModel):
    """One trained variant, measured on the held-out episodes."""

    variant: str
    mode: str
    d_s: int
    final_eval_loss: float | None
    effective_rank: float
    z_s_r2: float
    full_z_r2: float
    rollout_mse: float | None
    task_efficiency: float | None
    complement_efficiency: float | None
    effective_split_size: int
    recovery_r2: float | None
    ssim: float | None = None


def measure_variant(variant: str, config: ExperimentConfig, dataset: TrajectoryBatch) -> AblationRow:
    """Train ``config`` on ``dataset`` and summarise it on the evaluation episodes."""
    logger.info("training variant %s", variant)
    model, report = fit_model(config, dataset)
    _, held_out = split_episodes(dataset, config.training.eval_fraction)
    batch = held_out or dataset
    summary = probe_suite(model, batch, config.eval.model_copy(update={"robustness": False}), seed=config.seed)
    by_block = {(p.label, p.target): p for p in summary.probes}
    a4 = check_a4(model, batch, config.eval.probe_folds, config.eval.ridge_alpha)
    return AblationRow(
        variant=variant,
        mode=config.training.mode,
        d_s=model.d_s,
        final_eval_loss=report.final_eval.total if report.final_eval else None,
        effective_rank=summary.effective_rank,
        z_s_r2=by_block[("z_s", "proprio")].r2_mean,
        full_z_r2=by_block[("full-z", "proprio")].r2_mean,
        rollout_mse=summary.rollout_mse[-1] if summary.rollout_mse else None,
        task_efficiency=a4.task_efficiency,
        complement_efficiency=a4.complement_efficiency,
        effective_split_size=len(summary.effective_split),
        recovery_r2=summary.recovery_r2,
        ssim=summary.ssim,
    )


def ablate(config: ExperimentConfig, preset: str, dataset: TrajectoryBatch) -> list[AblationRow]:
    """Full model against a preset variant on the same data and seed.

    ``split-sweep`` instead trains the full model once per task-block size.
    """
    if preset not in ABLATION_PRESETS:
        raise ConfigError(f"unknown ablation preset '{preset}' (known: {', '.join(ABLATION_PRESETS)})", [preset])
    base = config.model_dump(mode="json")

    if preset == "split-sweep":
        sizes = [d for d in SPLIT_SWEEP if d <= config.model.d_z]
        if not sizes:
            raise ConfigError(f"model.d_z={config.model.d_z} is below every swept split size", ["model.d_z"])
        return [
            measure_variant(f"d_s={d}", validate_config(deep_merge(base, {"model": {"d_s": d}})), dataset)
            for d in sizes
        ]

    variant = validate_config(deep_merge(base, load_preset(preset)))
    return [measure_variant("full", config, dataset), measure_variant(preset, variant, dataset)]
