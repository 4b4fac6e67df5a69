"""Pydantic models for tcwm configuration."""

from typing import Literal

try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


class WorldSpec(StrictModel):
    """Ground-truth synthetic POMDP."""

    d_s: int = Field(4, ge=1)
    d_c: int = Field(12, ge=0)
    d_x: int = Field(64, ge=1)
    d_a: int = Field(2, ge=1)
    dynamics_mode: Literal["linear", "tanh-mlp"] = "linear"
    mixing_mode: Literal["linear", "tanh-mlp"] = "linear"
    proprio_mode: Literal["identity", "scaled-shifted", "smooth-monotone"] = "identity"
    noise_std_embed: float = Field(0.05, ge=0)
    noise_std_dyn: float = Field(0.01, ge=0)
    distractor_std: float = Field(0.3, ge=0)
    distractor_decay: float = Field(0.9, ge=0, le=1)
    control_gain: float = Field(0.1, gt=0)
    action_box: list[tuple[float, float]] | None = None
    seed: int | None = None

    @model_validator(mode="after")
    def _check_dims(self) -> Self:
        if self.d_x < self.d_s + self.d_c:
            raise ValueError(f"d_x={self.d_x} must be >= d_s + d_c = {self.d_s + self.d_c}")
        if self.action_box is not None:
            if len(self.action_box) != self.d_a:
                raise ValueError(f"action_box has {len(self.action_box)} entries, d_a={self.d_a}")
            for low, high in self.action_box:
                if not low < high:
                    raise ValueError(f"empty action interval ({low}, {high})")
        return self

    @property
    def d_z(self) -> int:
        return self.d_s + self.d_c

    @property
    def action_low(self) -> np.ndarray:
        box = self.action_box or [(-1.0, 1.0)] * self.d_a
        return np.array([lo for lo, _ in box], dtype=np.float64)

    @property
    def action_high(self) -> np.ndarray:
        box = self.action_box or [(-1.0, 1.0)] * self.d_a
        return np.array([hi for _, hi in box], dtype=np.float64)


class WallRect(StrictModel):
    """Axis-aligned wall segment with a small thickness."""

    x0: float
    y0: float
    x1: float
    y1: float

    @model_validator(mode="after")
    def _ordered(self) -> Self:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("wall corners must satisfy x0 < x1 and y0 < y1")
        return self


class NavSpec(StrictModel):
    """Point-mass navigation layout on top of a two-dimensional task block."""

    bound: float = Field(1.0, gt=0)
    step_size: float = Field(0.1, gt=0)
    goal_tolerance: float = Field(0.1, gt=0)
    walls: list[WallRect] = Field(default_factory=lambda: [WallRect(x0=0.45, y0=0.5, x1=0.55, y1=1.0)])
    agent_sigma_px: float = Field(1.0, gt=0)


class WorldSection(WorldSpec):
    """World plus how the offline dataset is generated from it."""

    kind: Literal["generic", "nav"] = "generic"
    nav: NavSpec = Field(default_factory=NavSpec)
    n_traj: int = Field(200, ge=1)
    traj_len: int = Field(50, ge=1)
    policy: Literal["uniform-random", "goal-seeking-scripted"] = "uniform-random"
    renders: bool = False
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _nav_dims(self) -> Self:
        if self.kind == "nav" and self.d_s != 2:
            raise ValueError("nav worlds need d_s = 2 (planar position)")
        if self.renders and self.kind != "nav":
            raise ValueError("renders are only defined for nav worlds")
        return self

    def world_spec(self) -> WorldSpec:
        return WorldSpec.model_validate(self.model_dump(include=set(WorldSpec.model_fields)))


class ModelConfig(StrictModel):
    """Sizes and switches of the world model."""

    d_z: int = Field(16, ge=1)
    d_s: int = Field(4, ge=1)
    d_align: int | None = Field(None, ge=1)
    d_pe: int | None = Field(None, ge=1)
    history: int = Field(1, ge=0)
    hidden: list[int] = Field(default_factory=lambda: [64, 64])
    align_input: Literal["slice", "full"] = "full"
    mode: Literal["tcwm", "direct-embedding"] = "tcwm"
    visual_decoder: bool = False
    visual_hidden: int = Field(64, ge=1)

    @model_validator(mode="after")
    def _split_fits(self) -> Self:
        if self.d_s > self.d_z:
            raise ValueError(f"d_s={self.d_s} exceeds d_z={self.d_z}")
        return self


class LossWeights(StrictModel):
    """Coefficients of the training objective."""

    align: float = Field(0.1, ge=0)
    rec: float = Field(10.0, ge=0)
    l1: float = Field(1e-3, ge=0)
    tau: float = Field(0.1, gt=0)


TrainMode = Literal["tcwm", "no-align", "no-rec", "direct-embedding"]


class TrainConfig(StrictModel):
    """Offline training loop settings."""

    epochs: int = Field(100, ge=0)
    batch_size: int = Field(64, ge=2)
    lr: float = Field(1e-3, gt=0)
    seed: int | None = None
    mode: TrainMode = "tcwm"
    eval_fraction: float = Field(0.2, ge=0, lt=1)
    stop_grad_target: bool = True
    include_positive: bool = True
    weights: LossWeights = Field(default_factory=LossWeights)


class CemConfig(StrictModel):
    """Cross-entropy method settings."""

    population: int = Field(256, ge=1)
    elites: int = Field(32, ge=1)
    iterations: int = Field(10, ge=1)
    plan_horizon: int = Field(5, ge=1)
    execute_horizon: int = Field(1, ge=1)
    init_std: float | None = Field(None, gt=0)
    std_floor: float = Field(1e-6, gt=0)
    reinflate_std: float = Field(0.1, gt=0)
    cost_dims: Literal["full", "task"] = "full"
    workers: int = Field(1, ge=1)
    seed: int | None = None

    @model_validator(mode="after")
    def _bounds(self) -> Self:
        if self.elites > self.population:
            raise ValueError(f"elites={self.elites} exceeds population={self.population}")
        if self.execute_horizon > self.plan_horizon:
            raise ValueError("execute_horizon must not exceed plan_horizon")
        return self


class DiffusionConfig(StrictModel):
    """Latent diffusion planner and inverse dynamics settings."""

    steps: int = Field(100, ge=1)
    beta_start: float = Field(1e-4, gt=0, lt=1)
    beta_end: float = Field(0.02, gt=0, lt=1)
    horizon: int = Field(8, ge=1)
    execute_horizon: int = Field(1, ge=1)
    hidden: list[int] = Field(default_factory=lambda: [128, 128])
    idm_hidden: list[int] = Field(default_factory=lambda: [64, 64])
    time_features: int = Field(16, ge=2)
    epochs: int = Field(200, ge=0)
    batch_size: int = Field(128, ge=1)
    lr: float = Field(1e-3, gt=0)
    goal_conditioned: bool = True
    seed: int | None = None

    @model_validator(mode="after")
    def _schedule(self) -> Self:
        if self.beta_end < self.beta_start:
            raise ValueError("beta_end must be >= beta_start")
        if self.execute_horizon > self.horizon:
            raise ValueError("execute_horizon must not exceed horizon")
        return self


class PlannerSection(StrictModel):
    """Which planner to run and how many closed-loop episodes."""

    kind: Literal["cem", "ldp"] = "cem"
    cem: CemConfig = Field(default_factory=CemConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    episodes: int = Field(50, ge=1)
    max_steps: int = Field(50, ge=1)


class EvalConfig(StrictModel):
    """Toggles and sizes of the measurement suite."""

    probes: bool = True
    assumptions: bool = True
    robustness: bool = True
    probe_folds: int = Field(5, ge=2)
    ridge_alpha: float = Field(1.0, gt=0)
    a1_pairs: int = Field(4096, ge=1)
    a1_delta: float = Field(1e-3, gt=0)
    a2_pairs: int = Field(2048, ge=2)
    rollout_horizon: int = Field(5, ge=0)
    split_threshold: float = Field(0.1, ge=0, le=1)
    plots: bool = False


class ExperimentConfig(StrictModel):
    """Everything one experiment run needs; ``{}`` is a valid config."""

    world: WorldSection = Field(default_factory=WorldSection)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    planner: PlannerSection = Field(default_factory=PlannerSection)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _modes_agree(self) -> Self:
        direct_train = self.training.mode == "direct-embedding"
        direct_model = self.model.mode == "direct-embedding"
        if direct_train != direct_model:
            raise ValueError("training.mode and model.mode must both be direct-embedding or neither")
        return self

    @model_validator(mode="after")
    def _fill_seeds(self) -> Self:
        for section in (self.world, self.training, self.planner.cem, self.planner.diffusion):
            if section.seed is None:
                section.seed = self.seed
        return self
