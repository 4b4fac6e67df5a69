"""Dataset generation command."""

import typer

from .. import pipeline
from ..core.config import OutputLayout, load_experiment_config
from ..core.datastore import save_dataset
from .common import ConfigOption, OutOption, PresetOption, cli_errors


def gen(
    out: OutOption,
    config: ConfigOption = None,
    preset: PresetOption = None,
) -> None:
    """Generate an offline trajectory dataset from the configured world."""
    with cli_errors():
        cfg = load_experiment_config(config, preset)
        batch = pipeline.generate(cfg)
        layout = OutputLayout(out)
        save_dataset(batch, layout.dataset_path)

    typer.echo(
        f"Wrote {batch.n_episodes} trajectories ({batch.n_steps} steps, "
        f"{cfg.world.kind} world) to {layout.dataset_path}"
    )
