from pathlib import Path
from typing import Optional

import typer
from loguru import logger

from relgan.config import load_config, load_task_spec, task_spec_from_dict
from relgan.data.datasets import make_dataset

from .main import app, exit_codes

DEFAULT_TASK = "synthetic_default"


@app.command(name="make-dataset", help="Generate a synthetic two-domain dataset as PNG directories.")
def make_dataset_command(
    spec: Optional[Path] = typer.Option(
        None, "--spec", help="Task description (JSON). Defaults to the packaged task."
    ),
    out: Path = typer.Option(..., "--out", help="Output directory."),
    force: bool = typer.Option(False, "--force", help="Overwrite a non-empty output directory."),
    progress: bool = typer.Option(True, help="Show a progress bar."),
) -> None:
    with exit_codes():
        task = load_task_spec(spec) if spec is not None else task_spec_from_dict(load_config(DEFAULT_TASK))
        logger.info(f"Generating the `{task.texture_a}` → `{task.texture_b}` task into {out}")
        make_dataset(task, out, force=force, progress=progress)
