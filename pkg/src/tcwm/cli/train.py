"""Training command."""

import typer

from .. import pipeline
from ..core.config import OutputLayout, load_experiment_config
from ..evaluation import plot_curves
from ..model import save_checkpoint
from .common import ConfigOption, DataOption, OutOption, PresetOption, cli_errors, fmt


def train(
    data: DataOption,
    out: OutOption,
    config: ConfigOption = None,
    preset: PresetOption = None,
) -> None:
    """Train a world model on a dataset and save the checkpoint."""
    with cli_errors():
        cfg = load_experiment_config(config, preset)
        dataset = pipeline.resolve_dataset(data)
        model, report = pipeline.fit_model(cfg, dataset)

        layout = OutputLayout(out)
        layout.ensure_dirs()
        save_checkpoint(model, layout.checkpoint_path, experiment=cfg.model_dump(mode="json"))
        report.to_csv(layout.report_file("train.csv"))
        report.to_json(layout.report_file("train.json"))
        if cfg.eval.plots and report.epochs:
            series = {"train": [r.train.total for r in report.epochs]}
            evals = [r.eval.total for r in report.epochs if r.eval is not None]
            if evals:
                series["eval"] = evals
            plot_curves(series, layout.report_file("train_loss.svg"), title=f"{cfg.training.mode} loss", xlabel="epoch")

    final = report.final_eval.total if report.final_eval else None
    typer.echo(f"Trained {len(report.epochs)} epochs ({cfg.training.mode}); final eval loss {fmt(final)}")
    typer.echo(f"Checkpoint: {layout.checkpoint_path}")
