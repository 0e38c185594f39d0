import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple, Union

import torch
from torch import Tensor
from torchmetrics.functional import peak_signal_noise_ratio, structural_similarity_index_measure

from relgan.data.datasets import TranslationDataset
from relgan.errors import MetricError, ShapeError
from relgan.nn.quartet import GeneratorQuartet
from relgan.utils.safe_run import SafeRun
from relgan.visualization.grids import save_grid, translation_grid

# Single-scale SSIM on images remapped to [0, 1]
SSIM_KERNEL_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DATA_RANGE = 1.0

# Value range of images in [-1, 1]
PSNR_DATA_RANGE = 2.0

DIRECTIONS = ("AB", "BA")


@dataclass
class EvalReport:
    r"""
    Means over a test set. `psnr_db` is `inf` when every output equals its
    ground truth, written `Infinity` in JSON.
    """

    mae_translation: float
    ssim: float
    psnr_db: float
    bps: float
    fgs: float
    n_samples: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, values: Dict[str, float]) -> "EvalReport":
        return cls(**{k: values[k] for k in cls.__dataclass_fields__})


def _as_batch(x: Tensor) -> Tensor:
    if x.dim() == 3:
        return x[None]
    if x.dim() == 4:
        return x
    raise ShapeError("image", x.shape, detail="expected C×H×W or N×C×H×W")


def ssim(x: Tensor, y: Tensor) -> float:
    r"""
    Structural similarity of two images in [-1, 1], remapped to [0, 1]:
    11×11 gaussian window with sigma 1.5, $C_1 = (0.01 L)^2$, $C_2 = (0.03 L)^2$, $L = 1$.
    Computed in double precision.
    """
    if x.shape != y.shape:
        raise ShapeError("ssim", x.shape, y.shape)
    x, y = _as_batch(x), _as_batch(y)
    if min(x.shape[-2:]) < SSIM_KERNEL_SIZE:
        raise MetricError(
            f"SSIM needs images of at least {SSIM_KERNEL_SIZE}×{SSIM_KERNEL_SIZE} pixels, "
            f"got {tuple(x.shape[-2:])}"
        )
    x = (x.detach().to(torch.float64) + 1.0) / 2.0
    y = (y.detach().to(torch.float64) + 1.0) / 2.0
    value = structural_similarity_index_measure(
        x,
        y,
        gaussian_kernel=True,
        sigma=SSIM_SIGMA,
        kernel_size=SSIM_KERNEL_SIZE,
        data_range=SSIM_DATA_RANGE,
        k1=SSIM_K1,
        k2=SSIM_K2,
    )
    return float(value)


def psnr(x: Tensor, y: Tensor) -> float:
    r"""
    $10 \log_{10}(L^2 / \mathrm{MSE})$ with $L = 2$. Identical images give `inf`.
    """
    if x.shape != y.shape:
        raise ShapeError("psnr", x.shape, y.shape)
    x, y = x.detach().to(torch.float64), y.detach().to(torch.float64)
    if torch.equal(x, y):
        return math.inf
    return float(peak_signal_noise_ratio(x, y, data_range=PSNR_DATA_RANGE, base=10.0))


def background_preservation(input_a: Tensor, output_b: Tensor, mask: Tensor) -> Tuple[float, float]:
    r"""
    Mean absolute change between input and output, outside (`bps`) and inside
    (`fgs`) the foreground mask, in [-1, 1] space.

    Parameters:
        input_a, output_b: C×H×W images
        mask: H×W boolean foreground map

    Returns:
        (bps, fgs). `fgs` is 0 for an empty mask.
    """
    if input_a.shape != output_b.shape:
        raise ShapeError("background_preservation", input_a.shape, output_b.shape)
    if tuple(mask.shape) != tuple(input_a.shape[-2:]):
        raise ShapeError(
            "background_preservation", input_a.shape, mask.shape, detail="mask not aligned with images"
        )
    mask = mask.to(torch.bool)
    if bool(mask.all()):
        raise MetricError("the mask covers the whole image, background preservation is undefined")
    diff = (output_b.detach().to(torch.float64) - input_a.detach().to(torch.float64)).abs()
    bps = float(diff[..., ~mask].mean())
    fgs = float(diff[..., mask].mean()) if bool(mask.any()) else 0.0
    return bps, fgs


def _direction(quartet: GeneratorQuartet, test_set: TranslationDataset, direction: str):
    if direction == "AB":
        return quartet.g_ab, test_set.images_a, test_set.images_b
    if direction == "BA":
        return quartet.g_ba, test_set.images_b, test_set.images_a
    raise ValueError(f"Unknown direction `{direction}`, expected one of {DIRECTIONS}")


@torch.no_grad()
def translate_batches(generator: torch.nn.Module, images: Tensor, batch_size: int = 16) -> Tensor:
    dtype = next(iter(generator.parameters()), images).dtype
    outputs = [
        generator(images[ii : ii + batch_size].to(dtype)) for ii in range(0, images.shape[0], batch_size)
    ]
    return torch.cat(outputs)


def evaluate(
    quartet: GeneratorQuartet,
    test_set: TranslationDataset,
    direction: str = "AB",
    grid_path: Optional[Union[str, os.PathLike]] = None,
    batch_size: int = 16,
) -> EvalReport:
    r"""
    Translate every test input in `direction` and average the metrics against
    the aligned ground truth of the other domain. `bps`/`fgs` compare each
    output to its own input. `psnr_db` is pooled: the mean squared error over the
    whole set is converted once, so it is `inf` only when every output is exact.

    Parameters:
        quartet: the trained networks
        test_set: a paired dataset with masks
        direction: "AB" (g_ab on A, ground truth B) or "BA"
        grid_path: where to write the sample grid, if given
        batch_size: translation batch size

    Raises:
        MetricError: missing masks or ground truth, or a failing sample (with its index)
    """
    generator, inputs, targets = _direction(quartet, test_set, direction)
    if test_set.masks is None:
        raise MetricError("the test set has no masks, and the background-preservation score requires them")
    if not test_set.paired:
        raise MetricError("the test set has no aligned ground truth (unpaired dataset)")
    n = len(test_set)
    if n == 0:
        raise MetricError("the test set is empty")

    outputs = translate_batches(generator, inputs[:n], batch_size=batch_size)
    totals = {"mae_translation": 0.0, "ssim": 0.0, "bps": 0.0, "fgs": 0.0}
    for index in range(n):
        out, gt, inp = outputs[index], targets[index].to(outputs.dtype), inputs[index].to(outputs.dtype)
        try:
            bps, fgs = background_preservation(inp, out, test_set.masks[index])
            totals["mae_translation"] += float((out - gt).abs().to(torch.float64).mean())
            totals["ssim"] += ssim(out, gt)
            totals["bps"] += bps
            totals["fgs"] += fgs
        except (MetricError, ShapeError) as e:
            raise MetricError(str(e), index=index) from e

    if grid_path is not None:
        with SafeRun(name=f"Sample grid {direction}", raise_error=False):
            save_grid(translation_grid(inputs[:n], outputs, targets[:n]), grid_path)

    psnr_db = psnr(outputs, targets[:n].to(outputs.dtype))
    return EvalReport(**{k: v / n for k, v in totals.items()}, psnr_db=psnr_db, n_samples=n)
