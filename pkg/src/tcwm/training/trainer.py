"""Training objective with analytic gradients and the offline training loop."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ..core.datastore import compute_stats, split_episodes
from ..core.errors import DimensionError, DomainError, NumericError, TrainingError
from ..core.models import LossWeights, TrainConfig, TrainMode
from ..model.tcwm import TcwmModel, decode_embedding, embed_joint, encode
from ..numerics import AdamState, adam_step
from ..utils.seeding import derive_rng
from ..world.dataset import TrajectoryBatch
from .losses import info_nce, l1_penalty, mse
from .windows import WindowBatch, gather_windows, window_starts

logger = logging.getLogger(__name__)

MAX_EVAL_WINDOWS = 1024


class LossBreakdown(BaseModel):
    """Individual loss terms (unweighted) and the weighted total."""

    dyn_z: float = 0.0
    dyn_s: float = 0.0
    align: float = 0.0
    rec: float = 0.0
    l1: float = 0.0
    total: float = 0.0


class EpochRecord(BaseModel):
    epoch: int
    train: LossBreakdown
    eval: LossBreakdown | None = None
    visual: float | None = None


class TrainReport(BaseModel):
    """Per-epoch loss curves plus evaluation before and after training."""

    mode: TrainMode
    epochs: list[EpochRecord] = []
    initial_eval: LossBreakdown | None = None
    final_eval: LossBreakdown | None = None

    def to_csv(self, path: Path) -> None:
        terms = list(LossBreakdown.model_fields)
        header = ["epoch", *(f"train_{t}" for t in terms), *(f"eval_{t}" for t in terms), "visual"]
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for rec in self.epochs:
                ev = rec.eval.model_dump() if rec.eval else {}
                writer.writerow(
                    [
                        rec.epoch,
                        *(rec.train.model_dump()[t] for t in terms),
                        *(ev.get(t, "") for t in terms),
                        "" if rec.visual is None else rec.visual,
                    ]
                )

    def to_json(self, path: Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")


@dataclass
class TrainOptions:
    """Which terms take part in the gradient."""

    use_align: bool = True
    use_dyn_s: bool = True
    use_rec: bool = True
    stop_grad_target: bool = True
    include_positive: bool = True

    @classmethod
    def for_mode(cls, mode: TrainMode, stop_grad_target: bool = True, include_positive: bool = True) -> "TrainOptions":
        flags = {
            "tcwm": (True, True, True),
            "no-align": (False, False, True),
            "no-rec": (True, True, False),
            "direct-embedding": (False, False, False),
        }[mode]
        return cls(*flags, stop_grad_target=stop_grad_target, include_positive=include_positive)

    @classmethod
    def from_config(cls, config: TrainConfig) -> "TrainOptions":
        return cls.for_mode(config.mode, config.stop_grad_target, config.include_positive)


@dataclass
class FrozenTargets:
    """Dynamics and reconstruction targets held fixed while parameters move."""

    z_next: np.ndarray
    joint: np.ndarray


def frozen_targets(model: TcwmModel, batch: WindowBatch) -> FrozenTargets:
    """The targets ``objective`` detaches, computed once from the current parameters."""
    H = model.history
    J = embed_joint(model, batch.embeddings.astype(model.dtype), batch.proprio.astype(model.dtype))
    Z = J if model.projector is None else encode(model, J).z
    return FrozenTargets(z_next=Z[:, H + 1].copy(), joint=J.copy())


def objective(
    model: TcwmModel,
    batch: WindowBatch,
    weights: LossWeights,
    options: TrainOptions,
    with_grads: bool = True,
    targets: FrozenTargets | None = None,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """All loss terms on ``batch`` and the gradient of their weighted total.

    Terms switched off by ``options`` are still reported but neither enter the
    total nor send gradient. The reconstruction target is always treated as a
    constant. With ``targets`` the detached targets are taken from there
    instead of the current parameters; the dynamics target only when
    ``stop_grad_target`` is on.
    """
    H = model.history
    B, W = batch.size, batch.length
    if W != H + 2:
        raise DimensionError("window length", H + 2, W)
    dt = model.dtype
    X = batch.embeddings.astype(dt)
    S = batch.proprio.astype(dt)
    A = batch.actions.astype(dt)
    L = model.latent_dim
    params = model.named_parameters()
    grads = {name: np.zeros_like(p) for name, p in params.items()}

    J = embed_joint(model, X, S)
    Z = J if model.projector is None else encode(model, J).z
    dZ = np.zeros_like(Z)

    win = np.concatenate([Z[:, : H + 1], A[:, : H + 1]], axis=-1).reshape(B, -1)
    z_pred, dyn_cache = model.dynamics.forward_cache(win)
    z_target = targets.z_next if targets is not None and options.stop_grad_target else Z[:, H + 1]
    dyn_z, d_zpred = mse(z_pred, z_target)
    dyn_grads, d_win = model.dynamics.backward(dyn_cache, d_zpred)
    _accumulate(grads, model.dynamics.grads_to_dict(dyn_grads, "dynamics."))
    if not options.stop_grad_target:
        dZ[:, H + 1] -= d_zpred

    parts = LossBreakdown(dyn_z=dyn_z)
    total = dyn_z

    if model.tc_dynamics is not None:
        s_pred, tc_cache = model.tc_dynamics.forward_cache(win)
        parts.dyn_s, d_spred = mse(s_pred, S[:, H + 1])
        if options.use_dyn_s:
            total += parts.dyn_s
            tc_grads, d_win_s = model.tc_dynamics.backward(tc_cache, d_spred)
            _accumulate(grads, model.tc_dynamics.grads_to_dict(tc_grads, "tc_dynamics."))
            d_win = d_win + d_win_s

    if model.align_head is not None and model.proprio_head is not None:
        d_s = model.d_s
        z_in = Z[:, H, :d_s] if model.config.align_input == "slice" else Z[:, H]
        u = model.align_head(z_in)
        v = model.proprio_head(S[:, H])
        parts.align, du, dv = info_nce(u, v, weights.tau, options.include_positive)
        parts.l1, l1_grad = l1_penalty(model.align_head.weight)
        if options.use_align:
            total += weights.align * parts.align + weights.l1 * parts.l1
            g_grads, dz_in = model.align_head.backward(z_in, weights.align * du)
            grads["align_head.weight"] += g_grads.weight + weights.l1 * l1_grad
            grads["align_head.bias"] += g_grads.bias
            h_grads, _ = model.proprio_head.backward(S[:, H], weights.align * dv)
            grads["proprio_head.weight"] += h_grads.weight
            grads["proprio_head.bias"] += h_grads.bias
            if model.config.align_input == "slice":
                dZ[:, H, :d_s] += dz_in
            else:
                dZ[:, H] += dz_in

    if model.embed_decoder is not None:
        x_hat = decode_embedding(model, Z)
        parts.rec, d_xhat = mse(x_hat, J if targets is None else targets.joint)
        if options.use_rec:
            total += weights.rec * parts.rec
            dec_grads, dZ_rec = model.embed_decoder.backward(Z, weights.rec * d_xhat)
            grads["embed_decoder.weight"] += dec_grads.weight
            grads["embed_decoder.bias"] += dec_grads.bias
            dZ += dZ_rec

    parts.total = float(total)
    if not with_grads:
        return parts, {}

    dZ[:, : H + 1] += d_win.reshape(B, H + 1, L + model.d_a)[..., :L]
    if model.projector is not None and model.proprio_embedder is not None:
        p_grads, dJ = model.projector.backward(J, dZ)
        grads["projector.weight"] += p_grads.weight
        grads["projector.bias"] += p_grads.bias
        e_grads, _ = model.proprio_embedder.backward(S, dJ[..., model.d_x :])
        grads["proprio_embedder.weight"] += e_grads.weight
        grads["proprio_embedder.bias"] += e_grads.bias
    return parts, grads


def _accumulate(into: dict[str, np.ndarray], new: dict[str, np.ndarray]) -> None:
    for name, g in new.items():
        into[name] += g


def total_loss(model: TcwmModel, batch: WindowBatch, weights: LossWeights, options: TrainOptions) -> LossBreakdown:
    return objective(model, batch, weights, options, with_grads=False)[0]


def _mean_breakdown(rows: list[LossBreakdown]) -> LossBreakdown:
    fields = LossBreakdown.model_fields
    return LossBreakdown(**{f: float(np.mean([getattr(r, f) for r in rows])) for f in fields})


def _visual_step(model: TcwmModel, batch: WindowBatch, state: AdamState | None) -> float:
    """One decoder update on a detached reconstruction; returns its loss."""
    assert model.visual_decoder is not None and batch.renders is not None
    J = embed_joint(model, batch.embeddings, batch.proprio)
    x_hat = decode_embedding(model, encode(model, J).z)[..., : model.d_x]
    inputs = x_hat.reshape(-1, model.d_x)
    targets = batch.renders.reshape(inputs.shape[0], -1).astype(model.dtype)
    out, cache = model.visual_decoder.forward_cache(inputs)
    loss, d_out = mse(out, targets)
    if state is not None:
        vis_grads, _ = model.visual_decoder.backward(cache, d_out)
        adam_step(state, model.visual_parameters(), model.visual_decoder.grads_to_dict(vis_grads, "visual_decoder."))
    return loss


def _eval_windows(batch: TrajectoryBatch, model: TcwmModel, with_renders: bool) -> WindowBatch | None:
    starts = window_starts(batch.boundaries, batch.n_steps, model.history)
    if len(starts) < 2:
        return None
    if len(starts) > MAX_EVAL_WINDOWS:
        starts = starts[np.linspace(0, len(starts) - 1, MAX_EVAL_WINDOWS).astype(np.int64)]
    assert model.stats is not None
    return gather_windows(batch, starts, model.history, model.stats, with_renders)


def train(model: TcwmModel, dataset: TrajectoryBatch, config: TrainConfig) -> tuple[TcwmModel, TrainReport]:
    """Shuffled mini-batch Adam over windows of ``dataset``; updates ``model`` in place.

    Proprio statistics come from the training episodes only and are stored
    on the model. Evaluation uses the trailing ``eval_fraction`` of episodes
    (or the training windows when that split has none).
    """
    if (config.mode == "direct-embedding") != model.direct:
        raise DomainError(f"training mode {config.mode} does not match model mode {model.config.mode}")
    options = TrainOptions.from_config(config)
    weights = config.weights
    seed = config.seed or 0

    train_split, eval_split = split_episodes(dataset, config.eval_fraction)
    model.stats = compute_stats(train_split)
    starts = window_starts(train_split.boundaries, train_split.n_steps, model.history)
    if len(starts) < 2:
        raise DomainError(f"dataset yields {len(starts)} training windows; need at least 2")

    use_visual = model.visual_decoder is not None and dataset.renders is not None
    eval_batch = _eval_windows(eval_split, model, use_visual) if eval_split is not None else None
    if eval_batch is None:
        eval_batch = _eval_windows(train_split, model, use_visual)
        logger.warning("no evaluation windows; evaluating on training windows")

    report = TrainReport(mode=config.mode)
    if config.epochs == 0:
        return model, report

    report.initial_eval = total_loss(model, eval_batch, weights, options) if eval_batch else None
    params = model.named_parameters()
    state = AdamState.for_params(params, lr=config.lr)
    vis_state = AdamState.for_params(model.visual_parameters(), lr=config.lr) if use_visual else None
    batch_size = min(config.batch_size, len(starts))

    for epoch in range(config.epochs):
        order = derive_rng(seed, "epoch", epoch).permutation(starts)
        rows: list[LossBreakdown] = []
        vis_losses: list[float] = []
        for b, lo in enumerate(range(0, len(order), batch_size)):
            chunk = order[lo : lo + batch_size]
            if len(chunk) < 2:
                continue
            wb = gather_windows(train_split, chunk, model.history, model.stats, use_visual)
            try:
                parts, grads = objective(model, wb, weights, options)
                if not np.isfinite(parts.total):
                    raise NumericError("non-finite total loss")
                adam_step(state, params, grads)
            except NumericError as e:
                raise TrainingError(str(e), epoch, b) from e
            rows.append(parts)
            if use_visual:
                vis_losses.append(_visual_step(model, wb, vis_state))

        record = EpochRecord(epoch=epoch, train=_mean_breakdown(rows))
        if eval_batch is not None:
            record.eval = total_loss(model, eval_batch, weights, options)
        if vis_losses:
            record.visual = float(np.mean(vis_losses))
        report.epochs.append(record)
        t = record.train
        logger.info(
            "epoch %d: total=%.4f dyn_z=%.4f dyn_s=%.4f align=%.4f rec=%.4f l1=%.4f",
            epoch, t.total, t.dyn_z, t.dyn_s, t.align, t.rec, t.l1,
        )

    report.final_eval = report.epochs[-1].eval
    return model, report
