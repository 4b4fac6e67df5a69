"""Ablation command."""

from enum import Enum
from typing import Annotated

import typer
from pydantic import TypeAdapter

from .. import pipeline
from ..core.config import OutputLayout, load_experiment_config
from ..evaluation import write_csv
from .common import ConfigOption, DataOption, OutOption, cli_errors, fmt, print_table


class AblationPreset(str, Enum):
    no_rec = "no-rec"
    no_align = "no-align"
    direct_embedding = "direct-embedding"
    split_sweep = "split-sweep"


_ROWS = TypeAdapter(list[pipeline.AblationRow])


def ablate(
    preset: Annotated[AblationPreset, typer.Option("--preset", "-p", help="Variant to compare with the full model")],
    data: DataOption,
    out: OutOption,
    config: ConfigOption = None,
) -> None:
    """Train the full model and an ablated variant on the same data and compare them."""
    with cli_errors():
        cfg = load_experiment_config(config)
        dataset = pipeline.resolve_dataset(data)
        rows = pipeline.ablate(cfg, preset.value, dataset)

        layout = OutputLayout(out)
        layout.ensure_dirs()
        write_csv([r.model_dump() for r in rows], layout.report_file(f"ablation_{preset.value}.csv"))
        layout.report_file(f"ablation_{preset.value}.json").write_bytes(_ROWS.dump_json(rows, indent=2))

    print_table(
        f"Ablation: {preset.value}",
        ["variant", "d_s", "eff. rank", "z_s R²", "rollout", "A4 z_s", "A4 z_c", "split", "recovery R²", "SSIM"],
        [
            [
                r.variant,
                str(r.d_s),
                fmt(r.effective_rank, 3),
                fmt(r.z_s_r2),
                fmt(r.rollout_mse),
                fmt(r.task_efficiency),
                fmt(r.complement_efficiency),
                str(r.effective_split_size),
                fmt(r.recovery_r2),
                fmt(r.ssim),
            ]
            for r in rows
        ],
    )
