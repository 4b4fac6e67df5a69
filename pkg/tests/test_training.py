import numpy as np
import pytest

from tcwm.core.datastore import compute_stats
from tcwm.core.errors import DomainError, TrainingError
from tcwm.core.models import LossWeights, ModelConfig, TrainConfig
from tcwm.model import TcwmModel
from tcwm.numerics import grad_check
from tcwm.training import (
    TrainOptions,
    gather_windows,
    info_nce,
    l1_penalty,
    mse,
    frozen_targets,
    objective,
    train,
    window_starts,
)
from tcwm.utils.seeding import derive_rng


def test_mse_gradient():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    loss, grad = mse(pred, np.zeros((2, 2)))
    assert loss == pytest.approx(7.5)
    np.testing.assert_allclose(grad, pred / 2.0)


def test_l1_penalty():
    value, sign = l1_penalty(np.array([[1.0, -2.0], [0.0, 0.5]]))
    assert value == pytest.approx(3.5)
    np.testing.assert_array_equal(sign, [[1.0, -1.0], [0.0, 1.0]])


@pytest.mark.parametrize("include_positive", [True, False])
def test_info_nce_gradients(include_positive):
    rng = derive_rng(0, "nce")
    u = rng.standard_normal((5, 3))
    v = rng.standard_normal((5, 3))

    def loss_fn():
        loss, du, dv = info_nce(u, v, 0.3, include_positive)
        return loss, {"u": du, "v": dv}

    assert grad_check(loss_fn, {"u": u, "v": v}, h=1e-6, tol=1e-6) < 1e-6


def test_info_nce_is_near_zero_for_matched_pairs():
    eye = np.eye(4)
    loss, _, _ = info_nce(eye, eye, tau=0.05)
    assert loss < 1e-6


def test_info_nce_preconditions():
    with pytest.raises(DomainError, match="at least 2"):
        info_nce(np.ones((1, 3)), np.ones((1, 3)), 0.1)
    with pytest.raises(DomainError, match="temperature"):
        info_nce(np.ones((2, 3)), np.ones((2, 3)), 0.0)


def test_windows_stay_inside_episodes():
    starts = window_starts([0, 5, 10], 15, history=1)
    np.testing.assert_array_equal(starts, [0, 1, 2, 5, 6, 7, 10, 11, 12])
    assert len(window_starts([0, 2], 4, history=1)) == 0


def _windows(batch, model, n=6):
    starts = window_starts(batch.boundaries, batch.n_steps, model.history)[:n]
    return gather_windows(batch, starts, model.history, compute_stats(batch))


def _frozen_loss(model, wb, weights, options):
    """Loss closure whose detached targets stay at their values for the current parameters."""
    targets = frozen_targets(model, wb)

    def loss_fn():
        parts, grads = objective(model, wb, weights, options, targets=targets)
        return parts.total, grads

    return loss_fn


@pytest.mark.parametrize(
    "mode, stop_grad",
    [
        ("tcwm", True),
        ("tcwm", False),
        ("no-align", True),
        ("no-rec", True),
        ("no-rec", False),
        ("direct-embedding", True),
    ],
)
def test_objective_gradients_match_finite_differences(small_batch, mode, stop_grad):
    config = ModelConfig(
        d_z=4, d_s=2, history=1, hidden=[6], mode="direct-embedding" if mode == "direct-embedding" else "tcwm"
    )
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=config, seed=1, dtype=np.float64)
    wb = _windows(small_batch, model)
    weights = LossWeights(align=0.5, rec=1.0, l1=1e-2, tau=0.2)
    options = TrainOptions.for_mode(mode, stop_grad_target=stop_grad)
    params = model.named_parameters()
    if mode != "direct-embedding":
        assert {"projector.weight", "proprio_embedder.weight"} <= set(params)
    loss_fn = _frozen_loss(model, wb, weights, options)
    err = grad_check(loss_fn, params, h=1e-6, tol=1e-5, max_entries=6, rng=derive_rng(0, "gc"))
    assert err < 1e-5


def test_objective_with_sliced_alignment_input(small_batch):
    config = ModelConfig(d_z=4, d_s=2, history=0, hidden=[6], align_input="slice")
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=config, seed=2, dtype=np.float64)
    assert model.align_head.in_dim == 2
    wb = _windows(small_batch, model)
    options = TrainOptions.for_mode("tcwm")
    loss_fn = _frozen_loss(model, wb, LossWeights(), options)
    assert grad_check(loss_fn, model.named_parameters(), h=1e-6, tol=1e-5, max_entries=6) < 1e-5


def test_switched_off_terms_are_reported_but_not_summed(small_batch, tiny_config):
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config, seed=1)
    wb = _windows(small_batch, model)
    weights = LossWeights()
    parts, grads = objective(model, wb, weights, TrainOptions.for_mode("no-rec"))
    assert parts.rec > 0
    expected = parts.dyn_z + parts.dyn_s + weights.align * parts.align + weights.l1 * parts.l1
    assert parts.total == pytest.approx(expected, rel=1e-6)
    assert not np.any(grads["embed_decoder.weight"])

    parts, grads = objective(model, wb, weights, TrainOptions.for_mode("no-align"))
    assert parts.align > 0
    assert parts.total == pytest.approx(parts.dyn_z + weights.rec * parts.rec, rel=1e-6)
    assert not np.any(grads["align_head.weight"])
    assert not np.any(grads["tc_dynamics.0.weight"])


def test_train_reduces_eval_loss(small_batch, tiny_config):
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config, seed=0)
    _, report = train(model, small_batch, TrainConfig(epochs=20, batch_size=16, lr=1e-2, seed=0))
    assert len(report.epochs) == 20
    assert report.final_eval.total < report.initial_eval.total
    assert model.stats is not None


def test_train_is_deterministic(small_batch, tiny_config):
    config = TrainConfig(epochs=3, batch_size=8, seed=5)
    runs = []
    for _ in range(2):
        model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config, seed=5)
        train(model, small_batch, config)
        runs.append(model.named_parameters())
    for name in runs[0]:
        np.testing.assert_array_equal(runs[0][name], runs[1][name])


def test_zero_epochs_only_fits_statistics(small_batch, tiny_config):
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config)
    before = {k: v.copy() for k, v in model.named_parameters().items()}
    _, report = train(model, small_batch, TrainConfig(epochs=0))
    assert report.epochs == []
    assert model.stats is not None
    for name, value in model.named_parameters().items():
        np.testing.assert_array_equal(value, before[name])


def test_train_needs_two_windows(small_batch, tiny_config):
    one = small_batch.select_episodes([0])
    short = one.replace(
        embeddings=one.embeddings[:3],
        proprio=one.proprio[:3],
        actions=one.actions[:3],
        latents=one.latents[:3],
    )
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config)
    with pytest.raises(DomainError, match="training windows"):
        train(model, short, TrainConfig(epochs=1, eval_fraction=0.0))


def test_non_finite_data_raises_training_error(small_batch, tiny_config):
    poisoned = small_batch.replace(embeddings=small_batch.embeddings.copy())
    poisoned.embeddings[: small_batch.boundaries[5]] = np.nan
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config)
    with pytest.raises(TrainingError) as err:
        train(model, poisoned, TrainConfig(epochs=1, batch_size=8))
    assert err.value.epoch == 0
    assert err.value.batch == 0


def test_mode_mismatch_is_rejected(small_batch, tiny_config):
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config)
    with pytest.raises(DomainError, match="does not match"):
        train(model, small_batch, TrainConfig(mode="direct-embedding", epochs=1))


def test_visual_decoder_trains_on_renders():
    from tcwm.core.models import WorldSpec
    from tcwm.world import build_nav_env, generate_dataset

    env = build_nav_env(WorldSpec(d_s=2, d_c=2, d_x=8, d_a=2, seed=0))
    batch = generate_dataset(env, "uniform-random", n_traj=4, T=10, seed=0, renders=True)
    config = ModelConfig(d_z=4, d_s=2, history=0, hidden=[8], visual_decoder=True, visual_hidden=16)
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=config)
    _, report = train(model, batch, TrainConfig(epochs=3, batch_size=8))
    assert all(rec.visual is not None and np.isfinite(rec.visual) for rec in report.epochs)


def test_stop_gradient_equals_a_frozen_target(small_batch, tiny_config):
    model = TcwmModel.create(d_x=8, d_p=2, d_a=2, config=tiny_config, seed=4, dtype=np.float64)
    wb = _windows(small_batch, model)
    options = TrainOptions.for_mode("tcwm")
    live, live_grads = objective(model, wb, LossWeights(), options)
    frozen, frozen_grads = objective(model, wb, LossWeights(), options, targets=frozen_targets(model, wb))
    assert frozen.total == live.total
    for name, g in live_grads.items():
        np.testing.assert_array_equal(frozen_grads[name], g)

    shifted = frozen_targets(model, wb)
    shifted.z_next = shifted.z_next + 1.0
    moved, moved_grads = objective(model, wb, LossWeights(), options, targets=shifted)
    assert moved.dyn_z != live.dyn_z
    assert not np.array_equal(moved_grads["projector.weight"], live_grads["projector.weight"])


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_info_nce_is_scale_invariant(scale):
    rng = derive_rng(1, "nce-scale")
    u, v = rng.standard_normal((2, 6, 3))
    base, du, dv = info_nce(u, v, 0.2)
    scaled, du_s, dv_s = info_nce(scale * u, v, 0.2)
    assert scaled == pytest.approx(base, rel=1e-9)
    np.testing.assert_allclose(du_s, du / scale, rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(dv_s, dv, rtol=1e-6, atol=1e-12)


def test_info_nce_is_invariant_to_reordering_the_pairs():
    rng = derive_rng(2, "nce-perm")
    u, v = rng.standard_normal((2, 7, 3))
    perm = rng.permutation(7)
    base, du, dv = info_nce(u, v, 0.1)
    shuffled, du_p, dv_p = info_nce(u[perm], v[perm], 0.1)
    assert shuffled == pytest.approx(base, rel=1e-12)
    np.testing.assert_allclose(du_p, du[perm], atol=1e-12)
    np.testing.assert_allclose(dv_p, dv[perm], atol=1e-12)
