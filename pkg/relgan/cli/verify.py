import json
from pathlib import Path
from typing import Optional

import typer
from loguru import logger

from relgan.errors import GradCheckError
from relgan.trainer.verification import GRADCHECK_LOSSES, run_gradcheck
from relgan.utils import fs

from .main import app, exit_codes


@app.command(name="gradcheck", help="Check loss gradients against central finite differences.")
def gradcheck_command(
    loss: str = typer.Option("all", "--loss", help=f"`all` or one of {', '.join(GRADCHECK_LOSSES)}."),
    tol: float = typer.Option(1e-5, "--tol", help="Maximal relative error."),
    h: float = typer.Option(1e-6, "--h", help="Finite-difference step."),
    seed: int = typer.Option(0, "--seed", help="Seed of the fixture."),
    inject_bug: bool = typer.Option(
        False, "--inject-bug", help="Corrupt the G_AB gradients, the check must fail."
    ),
    report: Optional[Path] = typer.Option(None, "--report", help="Write the results as JSON."),
) -> None:
    if loss != "all" and loss not in GRADCHECK_LOSSES:
        raise typer.BadParameter(f"unknown loss `{loss}`, expected `all` or one of {list(GRADCHECK_LOSSES)}")
    with exit_codes():
        results = run_gradcheck(loss=loss, tol=tol, h=h, seed=seed, inject_bug=inject_bug)
        if report is not None:
            values = {
                "options": {"loss": loss, "tol": tol, "h": h, "seed": seed, "inject_bug": inject_bug},
                "checks": {
                    label: {"passed": r.passed, "max_rel_error": r.max_rel_error, "n_checked": r.n_checked}
                    for label, r in results
                },
            }
            fs.write_text(str(report), json.dumps(values, indent=2))
        failed = [(label, r) for label, r in results if not r.passed]
        if failed:
            raise GradCheckError("\n".join(f"{label}: {r.summary()}" for label, r in failed))
        logger.info(f"All {len(results)} gradient checks passed at tol {tol:.1e}")
