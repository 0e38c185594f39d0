from pathlib import Path
from typing import Optional

import typer
from loguru import logger

from relgan.config import load_config, load_train_config, train_config_from_dict
from relgan.trainer.train_options import cyclegan_baseline
from relgan.trainer.trainer import fit

from .main import app, exit_codes

DEFAULT_CONFIG = "relgan_default"
BASELINES = ("cyclegan",)


@app.command(name="train", help="Train a generator quartet and write a run directory.")
def train_command(
    config: Optional[Path] = typer.Option(
        None, "--config", help="Training configuration (JSON). Defaults to the packaged configuration."
    ),
    out: Path = typer.Option(..., "--out", help="Run directory."),
    resume: Optional[Path] = typer.Option(None, "--resume", help="Checkpoint to resume from."),
    baseline: Optional[str] = typer.Option(
        None, "--baseline", help="Train a baseline instead: `cyclegan` (tied generators, no relative terms)."
    ),
) -> None:
    if baseline is not None and baseline not in BASELINES:
        raise typer.BadParameter(f"unknown baseline `{baseline}`, expected one of {list(BASELINES)}")
    with exit_codes():
        if config is not None:
            cfg = load_train_config(config)
        else:
            cfg = train_config_from_dict(load_config(DEFAULT_CONFIG))
        if baseline == "cyclegan":
            cfg = cyclegan_baseline(cfg)
            logger.info("CycleGAN baseline: tied generators, lambda_rel1 = lambda_rel2 = 0")
        state = fit(cfg, out, resume=resume)
        logger.info(f"Run completed at step {state.step} ({state.phase.phase.name}): {out}")
