import json
import math
from pathlib import Path
from typing import Any, Dict

import typer
from loguru import logger

from relgan.errors import DataError
from relgan.trainer.metrics import EvalReport
from relgan.trainer.run_log import load_loss_frame
from relgan.trainer.trainer import CONFIG_FILE, EVAL_REPORT_FILE, METRICS_FILE
from relgan.utils import fs
from relgan.utils.safe_run import SafeRun
from relgan.visualization.curves import plot_loss_curves

from .main import app, exit_codes


def read_eval_report(run_dir: Path) -> Dict[str, Dict[str, float]]:
    path = fs.join(run_dir, EVAL_REPORT_FILE)
    if not fs.exists(path):
        raise DataError(f"Run {run_dir} has no evaluation report", files=[path])
    try:
        values = json.loads(fs.read_text(path))
        return {direction: EvalReport.from_dict(report).to_dict() for direction, report in values.items()}
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
        raise DataError(f"Invalid evaluation report {path}: {e!r}", files=[path]) from e


def metric_delta(a: float, b: float) -> float:
    """`b - a`, zero when both are equal (infinite PSNRs included)."""
    if a == b:
        return 0.0
    return b - a


def bps_ratio(bps_a: float, bps_b: float) -> float:
    if bps_a == 0.0:
        return 1.0 if bps_b == 0.0 else math.inf
    return bps_b / bps_a


def compare_reports(
    report_a: Dict[str, Dict[str, float]], report_b: Dict[str, Dict[str, float]]
) -> Dict[str, Any]:
    r"""
    Per direction and metric, the values of both runs and their difference
    (run B minus run A), plus the background-preservation ratio in direction AB.
    """
    directions = [d for d in report_a if d in report_b]
    if not directions:
        raise DataError("The two evaluation reports share no direction")
    comparison: Dict[str, Any] = {}
    for d in directions:
        a, b = report_a[d], report_b[d]
        comparison[d] = {
            key: {"a": a[key], "b": b[key], "delta": metric_delta(a[key], b[key])} for key in a if key in b
        }
    reference = "AB" if "AB" in directions else directions[0]
    comparison["bps_a"] = report_a[reference]["bps"]
    comparison["bps_b"] = report_b[reference]["bps"]
    comparison["bps_ratio"] = bps_ratio(comparison["bps_a"], comparison["bps_b"])
    return comparison


@app.command(name="compare", help="Compare the evaluation reports and loss curves of two runs.")
def compare_command(
    run_a: Path = typer.Option(..., "--run-a", help="First run directory."),
    run_b: Path = typer.Option(..., "--run-b", help="Second run directory."),
    out: Path = typer.Option(..., "--out", help="Comparison file (JSON)."),
) -> None:
    with exit_codes():
        comparison = compare_reports(read_eval_report(run_a), read_eval_report(run_b))
        fs.write_text(str(out), json.dumps(comparison, indent=2))
        logger.info(f"bps ratio (B / A): {comparison['bps_ratio']:.4f}")

        stem = str(out)[:-5] if str(out).endswith(".json") else str(out)
        curves = {}
        for label, run_dir in (("run_a", run_a), ("run_b", run_b)):
            metrics = fs.join(run_dir, METRICS_FILE)
            if fs.exists(metrics):
                curves[label] = load_loss_frame(metrics)
            else:
                logger.warning(f"Run {run_dir} has no metrics log, its curves are skipped")
        if curves:
            with SafeRun(name="Loss curve overlay", raise_error=False):
                plot_loss_curves(curves, f"{stem}_curves.png")

        configs = {}
        for label, run_dir in (("run_a", run_a), ("run_b", run_b)):
            config_path = fs.join(run_dir, CONFIG_FILE)
            configs[label] = json.loads(fs.read_text(config_path)) if fs.exists(config_path) else None
        configs["runs"] = {"run_a": str(run_a), "run_b": str(run_b)}
        fs.write_text(f"{stem}.config.json", json.dumps(configs, indent=2))
