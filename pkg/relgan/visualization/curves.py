import io
import json
import os
from typing import Any, Dict, Sequence, Union

import pandas as pd
from matplotlib.figure import Figure

from relgan.utils import fs

DEFAULT_CURVE_KEYS = ("total_g", "total_d")


def axes_metadata_path(png_path: Union[str, os.PathLike]) -> str:
    png_path = str(png_path)
    stem = png_path[:-4] if png_path.lower().endswith(".png") else png_path
    return stem + ".axes.json"


def plot_loss_curves(
    curves: Dict[str, pd.DataFrame],
    path: Union[str, os.PathLike],
    keys: Sequence[str] = DEFAULT_CURVE_KEYS,
) -> Dict[str, Any]:
    r"""
    Overlay the loss curves of several runs, one panel per key, and write the
    axes metadata next to the PNG (same stem, `.axes.json` suffix). Only the
    metadata is meant to be parsed; the pixels are for humans.

    Parameters:
        curves: run label → frame with a `step` column and one column per key
        path: output PNG
        keys: the loss fields to plot

    Returns:
        The axes metadata
    """
    fig = Figure(figsize=(8, 3 * len(keys)))
    axes = fig.subplots(len(keys), 1, squeeze=False)[:, 0]
    panels = []
    for ax, key in zip(axes, keys):
        series = []
        for label, frame in curves.items():
            if key not in frame.columns:
                continue
            ax.plot(frame["step"], frame[key], label=label, linewidth=1.0)
            series.append({"label": label, "n_points": int(frame[key].notna().sum())})
        ax.set_xlabel("step")
        ax.set_ylabel(key)
        if series:
            ax.legend(loc="upper right")
        panels.append(
            {
                "key": key,
                "xlabel": "step",
                "ylabel": key,
                "xlim": [float(v) for v in ax.get_xlim()],
                "ylim": [float(v) for v in ax.get_ylim()],
                "series": series,
            }
        )
    fig.tight_layout()

    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=100)
    fs.write_bytes(path, buffer.getvalue())

    metadata = {"image": fs.get_basename(path), "panels": panels}
    fs.write_text(axes_metadata_path(path), json.dumps(metadata, indent=2))
    return metadata
