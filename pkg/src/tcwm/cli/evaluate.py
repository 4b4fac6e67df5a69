"""Probe and assumption-verification commands."""

from pathlib import Path

import typer

from .. import pipeline
from ..core.config import load_experiment_config
from ..core.models import ExperimentConfig
from ..evaluation import plot_curves, write_csv, write_json
from .common import (
    ConfigOption,
    DataOption,
    ModelOption,
    OptionalOutOption,
    cli_errors,
    fmt,
    prepare_out,
    print_table,
)


def _experiment(config: Path | None, snapshot: ExperimentConfig | None) -> ExperimentConfig:
    if config is not None:
        return load_experiment_config(config)
    return snapshot or ExperimentConfig()


def probe(
    model: ModelOption,
    data: DataOption,
    out: OptionalOutOption = None,
    config: ConfigOption = None,
) -> None:
    """Linear probes, effective rank and rollout error of a trained model."""
    with cli_errors():
        tcwm, snapshot = pipeline.resolve_checkpoint(model)
        cfg = _experiment(config, snapshot)
        batch = pipeline.resolve_dataset(data)
        summary = pipeline.probe_suite(tcwm, batch, cfg.eval, seed=cfg.seed)

        layout = prepare_out(out)
        if layout is not None:
            write_json(summary, layout.report_file("probe.json"))
            write_csv([p.model_dump(exclude={"per_dim"}) for p in summary.probes], layout.report_file("probe.csv"))
            if summary.rollout_mse:
                write_csv(
                    [{"step": k + 1, "mse": v} for k, v in enumerate(summary.rollout_mse)],
                    layout.report_file("rollout.csv"),
                )
                if cfg.eval.plots:
                    plot_curves({"rollout": summary.rollout_mse}, layout.report_file("rollout.svg"), "rollout error")

    print_table(
        "Linear probes",
        ["block", "target", "R² mean", "R² std"],
        [[p.label, p.target, fmt(p.r2_mean), fmt(p.r2_std)] for p in summary.probes],
    )
    typer.echo(f"effective rank: {summary.effective_rank:.3f}")
    typer.echo("latent variances: " + " ".join(fmt(v) for v in summary.latent_variances))
    typer.echo(f"effective split: {summary.effective_split}")
    typer.echo(f"task-centric recovery R²: {fmt(summary.recovery_r2)}")
    if summary.ssim is not None:
        typer.echo(f"visual SSIM: {fmt(summary.ssim)}")
    if summary.rollout_mse:
        typer.echo("rollout error: " + " ".join(fmt(v) for v in summary.rollout_mse))
    for r in summary.robustness:
        typer.echo(f"robustness {r.kind}: R² {fmt(r.clean_r2)} -> {fmt(r.perturbed_r2)} (drop {fmt(r.relative_drop)})")


def verify(
    model: ModelOption,
    data: DataOption,
    out: OptionalOutOption = None,
    config: ConfigOption = None,
) -> None:
    """Check the identifiability assumptions on a trained model."""
    with cli_errors():
        tcwm, snapshot = pipeline.resolve_checkpoint(model)
        cfg = _experiment(config, snapshot)
        batch = pipeline.resolve_dataset(data)
        report = pipeline.verify(tcwm, batch, cfg.eval, cfg.training.eval_fraction, seed=cfg.seed)

        layout = prepare_out(out)
        if layout is not None:
            write_json(report, layout.report_file("assumptions.json"))

    rows = []
    if report.a1 is not None:
        a1 = report.a1
        rows.append(["A1 decoder sensitivity", f"p5={fmt(a1.p5)} p50={fmt(a1.p50)} p95={fmt(a1.p95)}", str(a1.passed)])
    else:
        rows.append(["A1 decoder sensitivity", "no decoder", "-"])
    if report.a2 is not None:
        a2 = report.a2
        detail = f"spearman={fmt(a2.spearman)} pearson={fmt(a2.pearson)} collapsed={a2.collapsed_pairs}"
        rows.append(["A2 distance agreement", detail, str(a2.passed)])
    if report.a4 is not None:
        a4 = report.a4
        detail = f"z_s={fmt(a4.task_efficiency)} z_c={fmt(a4.complement_efficiency)} ratio={fmt(a4.efficiency_ratio)}"
        rows.append(["A4 proprio efficiency", detail, str(a4.passed)])
    print_table("Assumption checks", ["check", "statistics", "passed"], rows)
    typer.echo(f"all checks passed: {report.passed}")
