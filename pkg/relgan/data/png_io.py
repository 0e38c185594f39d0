r"""
PNG reading and writing. Images are 8-bit RGB on disk and C×H×W float tensors in
[-1, 1] in memory, through the affine map `x = 2v/255 - 1`. Resizing is bilinear
with aligned corners and is skipped for images already at the requested size.
"""

import io
import os
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError
from torch import Tensor

from relgan.errors import DataError
from relgan.utils import fs

PathLike = Union[str, os.PathLike]


def to_tensor(pixels: np.ndarray) -> Tensor:
    """H×W×3 uint8 array → 3×H×W float32 tensor in [-1, 1]."""
    x = torch.from_numpy(np.array(pixels, dtype=np.uint8)).permute(2, 0, 1).to(torch.float32)
    return x * (2.0 / 255.0) - 1.0


def to_pixels(x: Tensor) -> np.ndarray:
    """C×H×W tensor in [-1, 1] → H×W×C uint8 array, rounding to the nearest level."""
    if x.dim() != 3:
        raise ValueError(f"Expected a C×H×W image, got shape {tuple(x.shape)}")
    levels = torch.round((x.detach().to(torch.float64).clamp(-1.0, 1.0) + 1.0) * 127.5)
    return levels.to(torch.uint8).permute(1, 2, 0).cpu().numpy()


def resize(x: Tensor, image_size: int) -> Tensor:
    if tuple(x.shape[-2:]) == (image_size, image_size):
        return x
    return F.interpolate(x[None], size=(image_size, image_size), mode="bilinear", align_corners=True)[0]


def load_png(path: PathLike, image_size: Optional[int] = None) -> Tensor:
    """Decode one PNG as RGB, optionally resized to `image_size`×`image_size`."""
    with Image.open(io.BytesIO(fs.read_bytes(path))) as img:
        pixels = np.asarray(img.convert("RGB"))
    x = to_tensor(pixels)
    return x if image_size is None else resize(x, image_size)


def save_png(x: Tensor, path: PathLike) -> None:
    buffer = io.BytesIO()
    Image.fromarray(to_pixels(x)).save(buffer, format="PNG")
    fs.write_bytes(path, buffer.getvalue())


def load_mask(path: PathLike, image_size: Optional[int] = None) -> Tensor:
    """Decode a grayscale mask PNG into an H×W boolean map (pixels above mid-gray are set)."""
    with Image.open(io.BytesIO(fs.read_bytes(path))) as img:
        pixels = np.asarray(img.convert("L"))
    mask = torch.from_numpy(np.array(pixels >= 128))
    if image_size is not None and tuple(mask.shape) != (image_size, image_size):
        size = (image_size, image_size)
        resized = F.interpolate(mask[None, None].to(torch.float32), size=size, mode="nearest")
        mask = resized[0, 0] > 0.5
    return mask


def save_mask(mask: Tensor, path: PathLike) -> None:
    pixels = mask.detach().cpu().numpy().astype(np.uint8) * 255
    buffer = io.BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    fs.write_bytes(path, buffer.getvalue())


def load_png_dir(path: PathLike, image_size: int) -> Tuple[List[str], Tensor]:
    r"""
    Load every PNG of a directory, sorted by file name.

    Returns:
        names: the file names
        images: N×3×image_size×image_size float32 tensor in [-1, 1]

    Raises:
        DataError: the directory is missing or holds no PNG, or some files cannot
            be decoded (all of them are listed)
    """
    if not fs.exists(path):
        raise DataError(f"Image directory does not exist: {path}", files=[str(path)])
    files = fs.list_files(path, ".png")
    if len(files) == 0:
        raise DataError(f"No PNG file found in {path}", files=[str(path)])

    images, bad_files = [], []
    for f in files:
        try:
            images.append(load_png(f, image_size))
        except (OSError, UnidentifiedImageError, ValueError):
            bad_files.append(f)
    if bad_files:
        raise DataError(f"{len(bad_files)} unreadable PNG file(s) in {path}", files=bad_files)

    names = [fs.get_basename(f) for f in files]
    return names, torch.stack(images)
