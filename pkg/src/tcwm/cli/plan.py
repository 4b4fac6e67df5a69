"""Closed-loop planning command."""

from enum import Enum
from pathlib import Path
from typing import Annotated

import typer

from .. import pipeline
from ..core.config import load_experiment_config
from ..core.errors import ConfigError
from ..evaluation import write_json
from ..planning import write_episode_log
from .common import ConfigOption, ModelOption, OptionalOutOption, cli_errors, prepare_out


class PlannerKind(str, Enum):
    cem = "cem"
    ldp = "ldp"


def plan(
    model: ModelOption,
    episodes: Annotated[int | None, typer.Option("--episodes", "-n", min=1, help="Number of episodes")] = None,
    planner: Annotated[PlannerKind | None, typer.Option("--planner", help="Override the configured planner")] = None,
    data: Annotated[Path | None, typer.Option("--data", "-d", help="Dataset to fit the diffusion planner on")] = None,
    out: OptionalOutOption = None,
    config: ConfigOption = None,
) -> None:
    """Run planner episodes in the navigation world against a random baseline."""
    with cli_errors():
        tcwm, snapshot = pipeline.resolve_checkpoint(model)
        if config is not None:
            cfg = load_experiment_config(config)
        elif snapshot is not None:
            cfg = snapshot
        else:
            raise ConfigError("checkpoint has no experiment snapshot; pass --config")
        if planner is not None:
            cfg.planner.kind = planner.value
        dataset = pipeline.resolve_dataset(data) if data is not None else None
        summary, outcomes = pipeline.plan_episodes(cfg, tcwm, dataset, episodes)

        layout = prepare_out(out)
        if layout is not None:
            write_json(summary, layout.report_file(f"plan_{summary.planner}.json"))
            write_episode_log(outcomes, layout.report_file(f"plan_{summary.planner}_episodes.csv"))

    typer.echo(
        f"{summary.planner}: success rate {summary.success_rate:.2f} over {summary.episodes} episodes "
        f"(random baseline {summary.random_success_rate:.2f}, mean steps {summary.mean_steps:.1f})"
    )
