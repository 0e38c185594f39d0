r"""
Relative-learning objective against its CycleGAN baseline on a synthetic task.

For every seed, trains the configured quartet and the tied baseline with the
same data, batch order and budget, then compares the final AB evaluations. The
comparison passes when, over the medians of the seeds,

    bps(relgan) <= BPS_FACTOR * bps(cyclegan)   and   ssim(relgan) >= ssim(cyclegan) - SSIM_MARGIN

Usage:
    python expts/run_comparison.py --config expts/configs/relgan_synthetic_32.json --out results/comparison
"""

# General imports
import json
import os
from dataclasses import replace
from os.path import abspath, dirname
from pathlib import Path
from typing import List

import pandas as pd
import typer
from loguru import logger

# Current project imports
import relgan
from relgan.config import load_train_config
from relgan.trainer.train_options import cyclegan_baseline
from relgan.trainer.trainer import EVAL_REPORT_FILE, fit
from relgan.utils import fs

MAIN_DIR = dirname(dirname(abspath(relgan.__file__)))
DEFAULT_CONFIG = os.path.join(MAIN_DIR, "expts", "configs", "relgan_synthetic_32.json")

BPS_FACTOR = 0.9
SSIM_MARGIN = 0.01
DIRECTION = "AB"


def run_seed(config: Path, seed: int, out: Path) -> List[dict]:
    cfg = replace(load_train_config(config), seed=seed, progress=False)
    rows = []
    for model, run_cfg in (("relgan", cfg), ("cyclegan", cyclegan_baseline(cfg))):
        run_dir = fs.join(out, model, f"seed_{seed}")
        if fs.exists(fs.join(run_dir, EVAL_REPORT_FILE)):
            logger.info(f"Reusing the finished run {run_dir}")
        else:
            fit(run_cfg, run_dir)
        report = json.loads(fs.read_text(fs.join(run_dir, EVAL_REPORT_FILE)))[DIRECTION]
        rows.append({"model": model, "seed": seed, **report})
    return rows


def main(
    config: Path = typer.Option(
        DEFAULT_CONFIG, "--config", help="Training configuration of the relgan runs."
    ),
    out: Path = typer.Option(
        Path("results/comparison"), "--out", help="Directory of the runs and the summary."
    ),
    seeds: List[int] = typer.Option([0, 1, 2], "--seed", help="Seeds, repeat the option for several."),
) -> None:
    rows = []
    for seed in seeds:
        rows.extend(run_seed(config, seed, out))
    df = pd.DataFrame(rows)
    fs.mkdir(out)
    df.to_csv(fs.join(out, "per_seed.csv"), index=False)

    medians = df.groupby("model")[["bps", "fgs", "ssim", "psnr_db", "mae_translation"]].median()
    bps_ok = medians.loc["relgan", "bps"] <= BPS_FACTOR * medians.loc["cyclegan", "bps"]
    ssim_ok = medians.loc["relgan", "ssim"] >= medians.loc["cyclegan", "ssim"] - SSIM_MARGIN
    summary = {
        "config": str(config),
        "seeds": list(seeds),
        "direction": DIRECTION,
        "medians": medians.to_dict(orient="index"),
        "bps_rule": bool(bps_ok),
        "ssim_rule": bool(ssim_ok),
        "passed": bool(bps_ok and ssim_ok),
    }
    fs.write_text(fs.join(out, "summary.json"), json.dumps(summary, indent=2))

    print(df.to_string(index=False))
    print("\nmedians:\n", medians)
    if not summary["passed"]:
        logger.warning(f"Comparison failed: bps rule {bps_ok}, ssim rule {ssim_ok}")
        raise typer.Exit(code=1)
    logger.info("Comparison passed")


if __name__ == "__main__":
    typer.run(main)
