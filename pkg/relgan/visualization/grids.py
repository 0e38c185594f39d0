r"""
Side-by-side sample grids: one row per sample, showing
input | output | ground truth | absolute-difference heatmap.
"""

import io
import os
from typing import Union

import numpy as np
from matplotlib import colormaps
from PIL import Image
from torch import Tensor

from relgan.data.png_io import to_pixels
from relgan.utils import fs

HEATMAP_CMAP = "inferno"


def diff_heatmap(x: Tensor, y: Tensor, cmap: str = HEATMAP_CMAP) -> np.ndarray:
    r"""
    Per-pixel |x - y| averaged over channels, scaled from [0, 2] to [0, 1] and
    mapped through a matplotlib colormap. Returns an H×W×3 uint8 array.
    """
    diff = (x.detach() - y.detach()).abs().mean(dim=0).clamp(0.0, 2.0) / 2.0
    rgba = colormaps[cmap](diff.cpu().numpy())
    return np.round(rgba[..., :3] * 255.0).astype(np.uint8)


def translation_grid(
    inputs: Tensor, outputs: Tensor, targets: Tensor, max_rows: int = 8, padding: int = 1
) -> np.ndarray:
    r"""
    Assemble the grid of the first `max_rows` samples.

    Parameters:
        inputs, outputs, targets: N×3×H×W batches in [-1, 1]
        max_rows: maximal number of rows
        padding: white pixels between panels

    Returns:
        the grid as an H×W×3 uint8 array
    """
    n_rows = min(max_rows, inputs.shape[0])
    h, w = inputs.shape[-2:]
    grid = np.full(
        (n_rows * (h + padding) + padding, 4 * (w + padding) + padding, 3), 255, dtype=np.uint8
    )
    for row in range(n_rows):
        panels = [
            to_pixels(inputs[row]),
            to_pixels(outputs[row]),
            to_pixels(targets[row]),
            diff_heatmap(outputs[row], targets[row]),
        ]
        top = padding + row * (h + padding)
        for col, panel in enumerate(panels):
            left = padding + col * (w + padding)
            grid[top : top + h, left : left + w] = panel
    return grid


def save_grid(grid: np.ndarray, path: Union[str, os.PathLike]) -> None:
    buffer = io.BytesIO()
    Image.fromarray(grid).save(buffer, format="PNG")
    fs.write_bytes(path, buffer.getvalue())
