"""Main CLI entry point."""

from typing import Annotated

import typer

from ..core.config import Settings, get_settings, set_settings
from .common import configure_logging

app = typer.Typer(
    name="tcwm",
    help="Task-centric world model lab: synthetic worlds, training, planning and identifiability checks",
    no_args_is_help=True,
)


@app.callback()
def main(
    log_level: Annotated[
        str | None, typer.Option("--log-level", help="Log level (default: $TCWM_LOG_LEVEL or WARNING)")
    ] = None,
) -> None:
    """Set up logging before any subcommand runs."""
    if log_level:
        set_settings(Settings(log_level))
    configure_logging(get_settings().log_level)


# Import and register subcommands
from . import ablate, data, evaluate, plan, train  # noqa: E402

app.command(name="gen")(data.gen)
app.command(name="train")(train.train)
app.command(name="probe")(evaluate.probe)
app.command(name="verify")(evaluate.verify)
app.command(name="plan")(plan.plan)
app.command(name="ablate")(ablate.ablate)


if __name__ == "__main__":
    app()
