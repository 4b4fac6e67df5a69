"""Probes, assumption checks and metrics for trained world models."""

from .assumptions import (
    A1Stats,
    A2Stats,
    A4Stats,
    AssumptionReport,
    assumption_report,
    check_a1,
    check_a2,
    check_a4,
    distance_agreement,
    proprio_efficiency,
)
from .metrics import (
    AffineFit,
    CollapseMetrics,
    affine_recovery,
    effective_rank,
    encode_batch,
    rollout_mse,
    ssim,
    task_centric_recovery,
    visual_fidelity,
)
from .perturb import RobustnessResult, perturb, robustness_drop
from .probes import ProbeResult, linear_probe
from .reports import plot_curves, write_csv, write_json

__all__ = [
    "A1Stats",
    "A2Stats",
    "A4Stats",
    "AffineFit",
    "AssumptionReport",
    "CollapseMetrics",
    "ProbeResult",
    "RobustnessResult",
    "affine_recovery",
    "assumption_report",
    "check_a1",
    "check_a2",
    "check_a4",
    "distance_agreement",
    "effective_rank",
    "encode_batch",
    "linear_probe",
    "perturb",
    "plot_curves",
    "proprio_efficiency",
    "robustness_drop",
    "rollout_mse",
    "ssim",
    "task_centric_recovery",
    "visual_fidelity",
    "write_csv",
    "write_json",
]
