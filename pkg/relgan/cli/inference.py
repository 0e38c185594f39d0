import json
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import typer
from loguru import logger

from relgan.config import train_config_from_dict
from relgan.data.datasets import load_dataset_dir
from relgan.data.png_io import load_png_dir, save_png
from relgan.errors import CheckpointError, DataError
from relgan.autodiff.precision import Precision
from relgan.trainer.checkpoint import Checkpoint, load_checkpoint
from relgan.trainer.metrics import DIRECTIONS, evaluate, translate_batches
from relgan.trainer.train_options import TrainConfig
from relgan.trainer.trainer import init_run_state
from relgan.nn.quartet import GeneratorQuartet
from relgan.utils import fs

from .main import app, exit_codes


class Direction(str, Enum):
    AB = "AB"
    BA = "BA"


def load_quartet(ckpt: Path) -> Tuple[GeneratorQuartet, TrainConfig, Checkpoint]:
    """The networks of a checkpoint, rebuilt from the configuration it records."""
    checkpoint = load_checkpoint(ckpt)
    saved = checkpoint.config
    if "config" not in saved:
        raise CheckpointError(f"Checkpoint {ckpt} records no training configuration")
    cfg = train_config_from_dict(saved["config"])
    state = init_run_state(cfg)
    checkpoint.restore_networks(state.quartet)
    state.quartet.eval()
    return state.quartet, cfg, checkpoint


def _write_resolved(path: str, values: dict) -> None:
    fs.write_text(path, json.dumps(values, indent=2, sort_keys=True))


@app.command(name="translate", help="Translate a directory of PNG images with a checkpoint.")
def translate_command(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file."),
    input_dir: Path = typer.Option(..., "--in", help="Directory of PNG images."),
    direction: Direction = typer.Option(..., "--direction", help="AB (g_ab) or BA (g_ba)."),
    out: Path = typer.Option(..., "--out", help="Output directory, files named after the inputs."),
    batch_size: int = typer.Option(16, help="Translation batch size."),
) -> None:
    with exit_codes():
        quartet, cfg, checkpoint = load_quartet(ckpt)
        names, images = load_png_dir(input_dir, cfg.arch.image_size)
        if images.shape[1] != cfg.arch.channels:
            raise DataError(f"The checkpoint expects {cfg.arch.channels}-channel images, PNG inputs are RGB")
        generator = quartet.g_ab if direction == Direction.AB else quartet.g_ba
        outputs = translate_batches(generator, images.to(Precision.parse(cfg.precision).dtype), batch_size)
        fs.mkdir(out)
        for name, image in zip(names, outputs):
            save_png(image, fs.join(out, name))
        _write_resolved(
            fs.join(out, "translate.json"),
            {"ckpt": str(ckpt), "in": str(input_dir), "direction": direction.value, "step": checkpoint.step},
        )
        logger.info(f"Translated {len(names)} images {direction.value} into {out}")


@app.command(name="eval", help="Evaluate a checkpoint against the ground truth of a synthetic dataset.")
def eval_command(
    ckpt: Path = typer.Option(..., "--ckpt", help="Checkpoint file."),
    data: Path = typer.Option(..., "--data", help="Dataset directory (with masks)."),
    out: Path = typer.Option(..., "--out", help="Report file (JSON)."),
    direction: Optional[Direction] = typer.Option(None, "--direction", help="Evaluate one direction only."),
    split: str = typer.Option("test", help="Dataset split, `test` or `train`."),
) -> None:
    with exit_codes():
        quartet, cfg, checkpoint = load_quartet(ckpt)
        dataset = load_dataset_dir(data, split, image_size=cfg.arch.image_size)
        dataset = dataset.to(Precision.parse(cfg.precision).dtype)
        stem = str(out)[:-5] if str(out).endswith(".json") else str(out)
        directions = DIRECTIONS if direction is None else (direction.value,)
        reports = {}
        for d in directions:
            report = evaluate(
                quartet, dataset, d, grid_path=f"{stem}_{d}.png", batch_size=cfg.eval_batch_size
            )
            reports[d] = report.to_dict()
            logger.info(f"{d}: {report.to_dict()}")
        fs.write_text(str(out), json.dumps(reports, indent=2))
        _write_resolved(
            f"{stem}.config.json",
            {
                "ckpt": str(ckpt),
                "data": str(data),
                "split": split,
                "directions": list(directions),
                "step": checkpoint.step,
            },
        )
