import numpy as np
import pytest

from tcwm import pipeline
from tcwm.core.models import EvalConfig, ExperimentConfig
from tcwm.evaluation import AssumptionReport, effective_rank, encode_batch

TINY_VISUAL = {
    "world": {
        "kind": "nav",
        "d_s": 2,
        "d_c": 2,
        "d_x": 8,
        "n_traj": 6,
        "traj_len": 12,
        "renders": True,
    },
    "model": {"d_z": 4, "d_s": 2, "history": 0, "hidden": [8], "visual_decoder": True, "visual_hidden": 8},
    "training": {"epochs": 1, "batch_size": 16},
    "eval": {"a1_pairs": 32, "a2_pairs": 32, "rollout_horizon": 2},
}


def test_verify_uses_the_configured_evaluation_split(monkeypatch, position_model, small_batch):
    seen = []

    def capture(model, batch, **kwargs):
        seen.append(batch.n_episodes)
        return AssumptionReport()

    monkeypatch.setattr(pipeline, "assumption_report", capture)
    pipeline.verify(position_model(8), small_batch, EvalConfig(), eval_fraction=0.5)
    pipeline.verify(position_model(8), small_batch, EvalConfig(), eval_fraction=0.2)
    assert seen == [3, 1]


def test_probe_suite_reports_latent_variances(position_model, small_batch):
    model = position_model(8)
    summary = pipeline.probe_suite(model, small_batch, EvalConfig(robustness=False, rollout_horizon=2))
    Z = encode_batch(model, small_batch)
    np.testing.assert_allclose(summary.latent_variances, Z.var(axis=0))
    assert summary.effective_rank == pytest.approx(effective_rank(Z))
    assert summary.ssim is None


def test_ablation_rows_carry_visual_ssim():
    config = ExperimentConfig.model_validate(TINY_VISUAL)
    dataset = pipeline.generate(config)
    assert dataset.renders is not None
    row = pipeline.measure_variant("full", config, dataset)
    assert row.ssim is not None and -1.0 <= row.ssim <= 1.0
    assert row.d_s == 2 and row.mode == "tcwm"
