import numpy as np
import pytest
from pydantic import ValidationError

from tcwm.core.errors import DimensionError, DomainError
from tcwm.core.models import NavSpec, WorldSpec
from tcwm.utils.seeding import derive_rng
from tcwm.world import (
    build_nav_env,
    build_world,
    emit_embedding,
    generate_dataset,
    invert_proprio,
    mix,
    nav_step,
    proprio_of,
    render,
    resolve_motion,
    step_true,
)
from tcwm.world.nav import inside_wall


def test_world_spec_rejects_too_narrow_embedding():
    with pytest.raises(ValidationError, match="d_x"):
        WorldSpec(d_s=4, d_c=12, d_x=8)


def test_build_world_is_deterministic(small_spec):
    a, b = build_world(small_spec), build_world(small_spec)
    np.testing.assert_array_equal(a.a_zz, b.a_zz)
    np.testing.assert_array_equal(a.mixing, b.mixing)


def test_linear_world_without_noise_follows_control():
    world = build_world(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, noise_std_dyn=0.0, distractor_std=0.0, seed=3))
    z = np.array([0.2, -0.1, 1.0, 0.5])
    a = np.array([1.0, -0.5])
    nxt = step_true(world, z, a, derive_rng(0, "t"))
    np.testing.assert_allclose(nxt[:2], z[:2] + 0.1 * a)
    # distractors ignore the action
    nxt_other = step_true(world, z, -a, derive_rng(0, "t"))
    np.testing.assert_allclose(nxt[2:], nxt_other[2:])


def test_step_rejects_actions_outside_box(small_world):
    with pytest.raises(DomainError, match="outside box"):
        step_true(small_world, np.zeros(4), np.array([1.5, 0.0]), derive_rng(0, "t"))


def test_step_rejects_wrong_latent_width(small_world):
    with pytest.raises(DimensionError):
        step_true(small_world, np.zeros(3), np.zeros(2), derive_rng(0, "t"))


def test_linear_mixing_is_injective(small_world):
    Z = derive_rng(0, "z").standard_normal((50, small_world.d_z))
    assert np.linalg.matrix_rank(mix(small_world, Z)) == small_world.d_z


@pytest.mark.parametrize("mode", ["identity", "scaled-shifted", "smooth-monotone"])
def test_proprio_map_is_invertible(mode):
    world = build_world(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, proprio_mode=mode, seed=1))
    z_s = derive_rng(0, "zs").uniform(-2.0, 2.0, (20, 2))
    np.testing.assert_allclose(invert_proprio(world, proprio_of(world, z_s)), z_s, atol=1e-9)


def test_embedding_noise_has_the_configured_std():
    world = build_world(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, noise_std_embed=0.1, seed=2))
    z = np.array([0.3, -0.2, 1.0, 0.5])
    x = emit_embedding(world, np.broadcast_to(z, (10_000, 4)), derive_rng(0, "emb"))
    np.testing.assert_allclose((x - mix(world, z)).std(axis=0), 0.1, atol=0.01)


def test_next_state_depends_only_on_state_action_and_noise():
    world = build_world(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, dynamics_mode="tanh-mlp", seed=5))
    z = np.array([0.1, 0.4, -0.3, 0.8])
    a = np.array([0.5, -1.0])
    first = step_true(world, z, a, derive_rng(7, "noise"))
    past = z
    for k in range(5):
        past = step_true(world, past, -a, derive_rng(k, "history"))
    second = step_true(world, z, a, derive_rng(7, "noise"))
    np.testing.assert_array_equal(first, second)


def test_uniform_actions_are_centred_in_the_box():
    world = build_world(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, action_box=[(-1.0, 1.0), (0.0, 2.0)], seed=0))
    batch = generate_dataset(world, "uniform-random", n_traj=200, T=50, seed=3)
    assert batch.actions.shape == (10_000, 2)
    np.testing.assert_allclose(batch.actions.mean(axis=0), [0.0, 1.0], atol=0.05)


def test_smooth_monotone_proprio_is_increasing():
    world = build_world(WorldSpec(d_s=1, d_c=0, d_x=2, d_a=1, proprio_mode="smooth-monotone"))
    grid = np.linspace(-3.0, 3.0, 200)[:, None]
    assert np.all(np.diff(proprio_of(world, grid)[:, 0]) > 0)


def test_generate_dataset_layout(small_batch):
    assert small_batch.n_episodes == 6
    assert small_batch.boundaries == [0, 12, 24, 36, 48, 60]
    assert small_batch.embeddings.shape == (72, 8)
    assert small_batch.proprio.shape == (72, 2)
    assert small_batch.actions.shape == (72, 2)
    assert small_batch.latents.shape == (72, 4)
    assert small_batch.embeddings.dtype == np.float32
    assert np.all(np.abs(small_batch.actions) <= 1.0)
    np.testing.assert_allclose(small_batch.proprio, small_batch.latents[:, :2], atol=1e-6)


def test_generate_dataset_does_not_depend_on_workers(small_world):
    serial = generate_dataset(small_world, "goal-seeking-scripted", n_traj=5, T=8, seed=4)
    threaded = generate_dataset(small_world, "goal-seeking-scripted", n_traj=5, T=8, seed=4, workers=3)
    np.testing.assert_array_equal(serial.embeddings, threaded.embeddings)
    np.testing.assert_array_equal(serial.actions, threaded.actions)


def test_generate_dataset_rejects_renders_without_nav(small_world):
    with pytest.raises(DomainError):
        generate_dataset(small_world, "uniform-random", n_traj=1, T=2, seed=0, renders=True)


def test_select_episodes_rebuilds_boundaries(small_batch):
    sub = small_batch.select_episodes([4, 1])
    assert sub.boundaries == [0, 12]
    np.testing.assert_array_equal(sub.latents[:12], small_batch.latents[48:60])


def test_nav_needs_planar_task_block():
    with pytest.raises(DomainError, match="d_s = d_a = 2"):
        build_nav_env(WorldSpec(d_s=3, d_c=1, d_x=8, d_a=3))


def test_motion_stops_at_wall():
    env = build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2))
    moved = resolve_motion(env, np.array([0.3, 0.7]), np.array([0.7, 0.7]))
    np.testing.assert_allclose(moved, [0.45, 0.7])


def test_motion_is_clipped_to_bounds():
    env = build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2), NavSpec(walls=[]))
    np.testing.assert_allclose(resolve_motion(env, np.array([0.95, 0.0]), np.array([1.2, -1.5])), [1.0, -1.0])


def test_nav_trajectories_never_enter_walls():
    env = build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, seed=2))
    batch = generate_dataset(env, "goal-seeking-scripted", n_traj=10, T=40, seed=2)
    assert not any(inside_wall(env, p) for p in batch.latents[:, :2].astype(np.float64))
    assert np.all(np.abs(batch.latents[:, :2]) <= 1.0 + 1e-6)


def test_nav_step_moves_by_step_size(open_nav):
    z = np.array([0.0, 0.0, 0.0, 0.0])
    nxt = nav_step(open_nav, z, np.array([1.0, 0.0]), derive_rng(0, "t"))
    assert nxt[0] == pytest.approx(0.1, abs=0.05)


def test_render_is_a_unit_range_image(open_nav):
    image = render(open_nav, np.array([0.5, -0.5, 0.0, 0.0]))
    assert image.shape == (16, 16)
    assert image.min() >= 0.0 and image.max() <= 1.0
    row, col = np.unravel_index(np.argmax(image), image.shape)
    # agent sits in the lower-right quadrant
    assert row >= 8 and col >= 8


def test_render_outside_bounds_fails(open_nav):
    with pytest.raises(DomainError):
        render(open_nav, np.array([2.0, 0.0, 0.0, 0.0]))


def test_nav_dataset_with_renders():
    env = build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, seed=5))
    batch = generate_dataset(env, "uniform-random", n_traj=2, T=5, seed=5, renders=True)
    assert batch.renders.shape == (10, 16, 16)
