import io
import json
import os
from typing import Any, Dict, List, Union

import fsspec
import pandas as pd

from relgan.trainer.losses import LossReport
from relgan.utils import fs

PathLike = Union[str, os.PathLike]

PHASE_TRANSITION = "phase_transition"


class MetricsLog:
    def __init__(self, path: PathLike):
        r"""
        Append-only JSON-lines log of a run. Step lines are
        `{"step": n, <LossReport fields>}`, event lines `{"event": name, "step": n}`.
        """
        self.path = str(path)

    def _append(self, entry: Dict[str, Any]) -> None:
        with fsspec.open(self.path, "a") as f:
            f.write(json.dumps(entry) + "\n")

    def write_step(self, step: int, report: LossReport) -> None:
        self._append({"step": int(step), **report.as_floats()})

    def write_event(self, event: str, step: int) -> None:
        self._append({"event": event, "step": int(step)})

    def read(self) -> List[Dict[str, Any]]:
        if not fs.exists(self.path):
            return []
        return [json.loads(line) for line in fs.read_text(self.path).splitlines() if line.strip()]

    def truncate(self, step: int) -> int:
        r"""
        Drop every line past `step`, so that a resumed run continues the log of
        its checkpoint. Returns the number of lines kept.
        """
        kept = [entry for entry in self.read() if entry.get("step", 0) <= step]
        fs.write_text(self.path, "".join(json.dumps(entry) + "\n" for entry in kept))
        return len(kept)


def load_loss_frame(path: PathLike) -> pd.DataFrame:
    """The step lines of a metrics log as a frame, one row per step."""
    text = fs.read_text(path)
    if not text.strip():
        return pd.DataFrame(columns=["step"])
    frame = pd.read_json(io.StringIO(text), lines=True)
    if "event" in frame.columns:
        frame = frame[frame["event"].isna()].drop(columns=["event"])
    return frame.sort_values("step").reset_index(drop=True)
