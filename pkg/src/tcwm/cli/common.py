"""Shared helpers for CLI commands."""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from ..core.config import OutputLayout
from ..core.errors import ConfigError, DatastoreError, TcwmError

ConfigOption = Annotated[Path | None, typer.Option("--config", "-c", help="Experiment config (JSON)")]
PresetOption = Annotated[list[str] | None, typer.Option("--preset", "-p", help="Preset overlay, repeatable")]
DataOption = Annotated[Path, typer.Option("--data", "-d", help="Dataset directory")]
ModelOption = Annotated[Path, typer.Option("--model", "-m", help="Checkpoint or training output directory")]
OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output directory")]
OptionalOutOption = Annotated[Path | None, typer.Option("--out", "-o", help="Write reports to this directory")]

console = Console()
logger = logging.getLogger(__name__)


def configure_logging(level: str) -> None:
    """Route library logs through rich at ``level``."""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


@contextmanager
def cli_errors() -> Iterator[None]:
    """Exit 1 on invalid input, 2 on any runtime failure."""
    try:
        yield
    except (ConfigError, ValidationError, DatastoreError) as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(1) from e
    except TcwmError as e:
        typer.echo(f"Failed: {e}", err=True)
        raise typer.Exit(2) from e
    except (typer.Exit, typer.Abort):
        raise
    except Exception as e:
        logger.exception("unexpected failure")
        typer.echo(f"Failed: {type(e).__name__}: {e}", err=True)
        raise typer.Exit(2) from e


def prepare_out(out: Path | None) -> OutputLayout | None:
    if out is None:
        return None
    layout = OutputLayout(out)
    layout.ensure_dirs()
    return layout


def fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def print_table(title: str, columns: list[str], rows: list[list[str]]) -> None:
    table = Table(title=title)
    for col in columns:
        table.add_column(col)
    for row in rows:
        table.add_row(*row)
    console.print(table)
