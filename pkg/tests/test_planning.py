import csv

import numpy as np
import pytest

from tcwm.core.errors import DimensionError, DomainError, PlannerError
from tcwm.core.models import CemConfig, DiffusionConfig
from tcwm.planning import (
    NoiseSchedule,
    cost,
    ddpm_sample,
    ldp_runner,
    mpc_runner,
    plan_cem,
    plan_ldp,
    random_runner,
    rollout,
    run_episodes,
    success_rate,
    train_ldp,
    write_episode_log,
)
from tcwm.planning.diffusion import time_features
from tcwm.utils.seeding import derive_rng

LOW = np.array([-1.0, -1.0])
HIGH = np.array([1.0, 1.0])


@pytest.fixture
def cem_config() -> CemConfig:
    return CemConfig(population=128, elites=16, iterations=8, plan_horizon=5, seed=0)


def test_rollout_follows_exact_dynamics(position_model):
    model = position_model(8)
    actions = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, -1.0]])
    out = rollout(model, np.zeros(2), actions)
    np.testing.assert_allclose(out, [[0.1, 0.0], [0.2, 0.1], [0.2, 0.0]], atol=1e-12)


def test_cost_over_task_dims():
    z_hat = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(cost(z_hat, np.zeros(3)), [14.0, 0.0])
    assert cost(np.array([1.0, 2.0, 3.0]), np.zeros(3), dims=[0]) == pytest.approx(1.0)


def test_cem_reaches_a_reachable_goal(position_model, cem_config):
    model = position_model(8)
    goal = np.array([0.3, 0.2])
    result = plan_cem(model, np.zeros(2), goal, cem_config, LOW, HIGH)
    assert result.actions.shape == (5, 2)
    assert result.cost < 1e-2
    assert result.cost <= result.prior_cost
    assert np.all(result.actions >= LOW) and np.all(result.actions <= HIGH)
    final = rollout(model, np.zeros(2), result.actions)[-1]
    assert cost(final, goal) == pytest.approx(result.cost)


def test_cem_elite_cost_never_increases(position_model, cem_config):
    result = plan_cem(position_model(8), np.zeros(2), np.array([-0.4, 0.1]), cem_config, LOW, HIGH)
    assert len(result.trace) == cem_config.iterations
    assert np.all(np.diff(result.trace) <= 1e-12)


def test_cem_is_deterministic_for_a_seed(position_model, cem_config):
    model = position_model(8)
    goal = np.array([0.1, -0.3])
    a = plan_cem(model, np.zeros(2), goal, cem_config, LOW, HIGH, seed=11)
    b = plan_cem(model, np.zeros(2), goal, cem_config, LOW, HIGH, seed=11)
    np.testing.assert_array_equal(a.actions, b.actions)


def test_cem_worker_chunks_do_not_change_the_result(position_model, cem_config):
    model = position_model(8)
    goal = np.array([0.2, 0.2])
    serial = plan_cem(model, np.zeros(2), goal, cem_config, LOW, HIGH)
    threaded = plan_cem(model, np.zeros(2), goal, cem_config.model_copy(update={"workers": 4}), LOW, HIGH)
    np.testing.assert_allclose(serial.actions, threaded.actions, atol=1e-9)


def test_cem_fails_when_every_rollout_is_non_finite(position_model, cem_config):
    model = position_model(8)
    model.dynamics.layers[0].weight[...] = np.nan
    with pytest.raises(PlannerError):
        plan_cem(model, np.zeros(2), np.zeros(2), cem_config, LOW, HIGH)


def test_cem_checks_goal_shape(position_model, cem_config):
    with pytest.raises(DimensionError, match="goal latent"):
        plan_cem(position_model(8), np.zeros(2), np.zeros(3), cem_config, LOW, HIGH)


def test_execute_horizon_limits_the_executed_prefix(position_model):
    cfg = CemConfig(population=16, elites=4, iterations=2, plan_horizon=4, execute_horizon=2, seed=0)
    result = plan_cem(position_model(8), np.zeros(2), np.array([0.1, 0.1]), cfg, LOW, HIGH)
    assert result.to_execute.shape == (2, 2)


def test_noise_schedule():
    schedule = NoiseSchedule.linear(50)
    assert schedule.steps == 50
    assert np.all(np.diff(schedule.alpha_bars) < 0)
    with pytest.raises(DomainError):
        NoiseSchedule.linear(0)
    with pytest.raises(DomainError):
        NoiseSchedule.linear(10, beta_start=0.2, beta_end=0.1)


def test_ddpm_with_exact_noise_oracle_recovers_the_data():
    schedule = NoiseSchedule.linear(20)
    target = np.array([[0.7, -1.3, 2.0]])

    def oracle(x, t):
        ab = schedule.alpha_bars[t]
        return (x - np.sqrt(ab) * target) / np.sqrt(1.0 - ab)

    sample = ddpm_sample(schedule, oracle, target.shape, derive_rng(0, "ddpm"))
    np.testing.assert_allclose(sample, target, atol=1e-8)


def test_ddpm_with_the_exact_gaussian_score_matches_the_covariance():
    schedule = NoiseSchedule.linear(1000)
    var = 4.0

    def gaussian_eps(x, t):
        ab = schedule.alpha_bars[t]
        return np.sqrt(1.0 - ab) * x / (ab * var + 1.0 - ab)

    samples = ddpm_sample(schedule, gaussian_eps, (1000, 3), derive_rng(0, "ddpm-gauss"))
    cov = np.cov(samples, rowvar=False)
    target = var * np.eye(3)
    assert np.linalg.norm(cov - target) <= 0.1 * np.linalg.norm(target)
    np.testing.assert_allclose(samples.mean(axis=0), 0.0, atol=0.25)


def test_time_features_shape_and_origin():
    feats = time_features(np.array([0, 5]), steps=10, dim=5)
    assert feats.shape == (2, 5)
    np.testing.assert_allclose(feats[0], [0.0, 0.0, 1.0, 1.0, 0.0])


@pytest.fixture
def ldp_data():
    rng = derive_rng(0, "ldp-data")
    actions = [rng.uniform(-1.0, 1.0, (12, 2)) for _ in range(3)]
    latents = [np.concatenate([np.zeros((1, 2)), 0.1 * np.cumsum(a[:-1], axis=0)]) for a in actions]
    return latents, actions


@pytest.fixture
def ldp_config() -> DiffusionConfig:
    return DiffusionConfig(
        steps=10, horizon=3, hidden=[16], idm_hidden=[16], time_features=4, epochs=2, batch_size=8, seed=0
    )


def test_latent_diffusion_planner_produces_boxed_actions(ldp_data, ldp_config):
    planner, report = train_ldp(*ldp_data, ldp_config)
    assert len(report.denoiser_loss) == 2 and len(report.idm_loss) == 2
    plan = plan_ldp(planner, np.zeros(2), np.array([0.3, 0.3]), derive_rng(0, "p"), LOW, HIGH)
    assert plan.latents.shape == (3, 2)
    assert plan.actions.shape == (3, 2)
    assert np.all(plan.actions >= LOW) and np.all(plan.actions <= HIGH)
    assert plan.to_execute.shape == (1, 2)


def test_ldp_report_has_one_loss_per_epoch(ldp_data, ldp_config):
    _, report = train_ldp(*ldp_data, ldp_config.model_copy(update={"epochs": 3}))
    assert len(report.denoiser_loss) == 3 and len(report.idm_loss) == 3
    assert all(np.isfinite(v) and v >= 0 for v in report.denoiser_loss + report.idm_loss)
    assert set(report.model_dump()) == {"denoiser_loss", "idm_loss"}
    _, empty = train_ldp(*ldp_data, ldp_config.model_copy(update={"epochs": 0}))
    assert empty.denoiser_loss == [] and empty.idm_loss == []


def test_goal_conditioned_planner_needs_a_goal(ldp_data, ldp_config):
    planner, _ = train_ldp(*ldp_data, ldp_config.model_copy(update={"epochs": 0}))
    with pytest.raises(PlannerError, match="goal"):
        plan_ldp(planner, np.zeros(2), None, derive_rng(0, "p"))


def test_ldp_horizon_longer_than_episodes(ldp_data, ldp_config):
    with pytest.raises(DomainError, match="horizon"):
        train_ldp(*ldp_data, ldp_config.model_copy(update={"horizon": 20}))


def test_ldp_runner_stays_within_step_budget(open_nav, position_model, ldp_data, ldp_config):
    planner, _ = train_ldp(*ldp_data, ldp_config)
    outcomes = run_episodes(open_nav, ldp_runner(position_model(8), planner, max_steps=4, seed=0), 1, seed=0)
    assert outcomes[0].steps <= 4


def test_random_episodes_are_reproducible(open_nav):
    a = run_episodes(open_nav, random_runner(15), episodes=3, seed=1)
    b = run_episodes(open_nav, random_runner(15), episodes=3, seed=1)
    assert [o.model_dump() for o in a] == [o.model_dump() for o in b]


def test_episode_log_layout(tmp_path, open_nav):
    outcomes = run_episodes(open_nav, random_runner(5), episodes=2, seed=0)
    write_episode_log(outcomes, tmp_path / "episodes.csv")
    with open(tmp_path / "episodes.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["episode", "step", "x", "y", "cost", "success"]
    assert len(rows) == 1 + sum(len(o.trajectory) for o in outcomes)


def test_mpc_with_exact_model_reaches_the_goal(open_nav, position_model):
    cfg = CemConfig(population=64, elites=8, iterations=4, plan_horizon=1, seed=0)
    outcomes = run_episodes(open_nav, mpc_runner(position_model(8), cfg, max_steps=60, seed=0), 2, seed=0)
    assert all(o.success for o in outcomes)
    assert all(o.trajectory[-1].cost is not None for o in outcomes)


@pytest.mark.slow
def test_mpc_beats_random_actions(open_nav, position_model):
    cfg = CemConfig(population=128, elites=16, iterations=5, plan_horizon=3, seed=0)
    mpc = run_episodes(open_nav, mpc_runner(position_model(8), cfg, max_steps=40, seed=0), 10, seed=3)
    baseline = run_episodes(open_nav, random_runner(40), 10, seed=3)
    assert success_rate(mpc) > success_rate(baseline)


def test_one_step_cem_matches_a_brute_force_grid(position_model):
    model = position_model(8)
    goal = np.array([0.05, -0.07])
    grid = np.linspace(-1.0, 1.0, 41)
    candidates = np.array([[[ax, ay]] for ax in grid for ay in grid])
    best_grid = float(np.min(cost(rollout(model, np.zeros(2), candidates)[:, -1], goal)))
    cfg = CemConfig(population=64, elites=8, iterations=6, plan_horizon=1, seed=0)
    result = plan_cem(model, np.zeros(2), goal, cfg, LOW, HIGH)
    assert result.cost <= best_grid + 1e-3
