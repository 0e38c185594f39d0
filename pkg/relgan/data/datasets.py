import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Union

import torch
from loguru import logger
from torch import Tensor
from tqdm.auto import tqdm

from relgan.data.png_io import load_mask, load_png_dir, save_mask, save_png
from relgan.data.synthetic import SyntheticTaskSpec, generate_sample
from relgan.errors import DataError
from relgan.utils import fs

PathLike = Union[str, os.PathLike]

DOMAIN_DIRS = {"train": ("trainA", "trainB"), "test": ("testA", "testB")}
MASK_DIR = "masks"
SPEC_FILE = "spec.json"


@dataclass
class TranslationDataset:
    r"""
    Images of the two domains held in memory.

    Parameters:
        images_a, images_b: N×C×H×W float tensors in [-1, 1]
        masks: N×H×W boolean foreground maps aligned with `images_a`, if known
        paired: whether `images_b[i]` is the translation of `images_a[i]`
        names_a, names_b: file names of the images, used when writing outputs
    """

    images_a: Tensor
    images_b: Tensor
    masks: Optional[Tensor] = None
    paired: bool = True
    names_a: List[str] = field(default_factory=list)
    names_b: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.images_a.dim() != 4 or self.images_b.dim() != 4:
            raise DataError("Domain images must be N×C×H×W batches")
        if self.images_a.shape[1:] != self.images_b.shape[1:]:
            raise DataError(
                f"Domains A and B have different image shapes {tuple(self.images_a.shape[1:])} "
                f"and {tuple(self.images_b.shape[1:])}"
            )
        if self.paired and self.images_a.shape[0] != self.images_b.shape[0]:
            raise DataError(
                f"A paired dataset needs as many A as B images, found {self.images_a.shape[0]} "
                f"and {self.images_b.shape[0]}"
            )
        if self.masks is not None and tuple(self.masks.shape) != (
            self.images_a.shape[0],
            *self.images_a.shape[2:],
        ):
            raise DataError(f"Masks of shape {tuple(self.masks.shape)} do not match the A images")
        if not self.names_a:
            self.names_a = [f"{ii:05d}.png" for ii in range(self.images_a.shape[0])]
        if not self.names_b:
            self.names_b = [f"{ii:05d}.png" for ii in range(self.images_b.shape[0])]

    def __len__(self) -> int:
        return min(self.images_a.shape[0], self.images_b.shape[0])

    @property
    def image_size(self) -> int:
        return self.images_a.shape[-1]

    @property
    def channels(self) -> int:
        return self.images_a.shape[1]

    def to(self, dtype: torch.dtype) -> "TranslationDataset":
        return replace(self, images_a=self.images_a.to(dtype), images_b=self.images_b.to(dtype))


def synthetic_dataset(spec: SyntheticTaskSpec, split: str = "train") -> TranslationDataset:
    """Generate the `split` of a synthetic task in memory."""
    samples = [generate_sample(spec, index) for index in spec.indices(split)]
    if len(samples) == 0:
        raise DataError(f"The synthetic task has no `{split}` sample")
    return TranslationDataset(
        images_a=torch.stack([s.image_a for s in samples]),
        images_b=torch.stack([s.image_b for s in samples]),
        masks=torch.stack([s.mask for s in samples]),
        paired=True,
    )


def make_dataset(spec: SyntheticTaskSpec, out: PathLike, force: bool = False, progress: bool = False) -> str:
    r"""
    Write a synthetic task as a directory tree:
    `trainA/ trainB/ testA/ testB/` holding `{k:05d}.png` images, `masks/` holding
    `{split}_{k:05d}.png` foreground masks and `spec.json` recording the task.

    Raises:
        DataError: `out` exists and is not empty, unless `force`
    """
    out = str(out)
    if fs.exists_and_not_empty(out):
        if not force:
            raise DataError(
                f"Output directory is not empty, use `--force` to overwrite it: {out}", files=[out]
            )
        logger.warning(f"Overwriting the non-empty directory {out}")
        fs.rm(out, recursive=True)
    fs.mkdir(out)

    for split, (dir_a, dir_b) in DOMAIN_DIRS.items():
        indices = spec.indices(split)
        for k, index in enumerate(tqdm(indices, desc=f"make-dataset {split}", disable=not progress)):
            sample = generate_sample(spec, index)
            save_png(sample.image_a, fs.join(out, dir_a, f"{k:05d}.png"))
            save_png(sample.image_b, fs.join(out, dir_b, f"{k:05d}.png"))
            save_mask(sample.mask, fs.join(out, MASK_DIR, f"{split}_{k:05d}.png"))

    fs.write_text(fs.join(out, SPEC_FILE), json.dumps(asdict(spec), indent=2, sort_keys=True))
    logger.info(f"Wrote {spec.n_train} train and {spec.n_test} test samples to {out}")
    return out


def read_task_spec(path: PathLike) -> Optional[SyntheticTaskSpec]:
    """The task recorded in a dataset directory, `None` for a directory of real images."""
    spec_path = fs.join(path, SPEC_FILE)
    if not fs.exists(spec_path):
        return None
    try:
        return SyntheticTaskSpec(**json.loads(fs.read_text(spec_path)))
    except (TypeError, ValueError) as e:
        raise DataError(f"Invalid task description: {e}", files=[spec_path]) from e


def load_dataset_dir(
    path: PathLike,
    split: str = "train",
    image_size: Optional[int] = None,
    paired: Optional[bool] = None,
) -> TranslationDataset:
    r"""
    Load one split of a dataset directory laid out as written by `make_dataset`.
    The `masks/` folder and `spec.json` are optional for real images.

    Parameters:
        path: the dataset directory
        split: "train" or "test"
        image_size: size the images are resized to. Defaults to the task's size,
            mandatory for directories without `spec.json`
        paired: whether A and B are aligned. Defaults to `True` for synthetic
            tasks and `False` otherwise
    """
    if split not in DOMAIN_DIRS:
        raise ValueError(f"Unknown split `{split}`, expected one of {list(DOMAIN_DIRS)}")
    if not fs.exists(path):
        raise DataError(f"Dataset directory does not exist: {path}", files=[str(path)])

    spec = read_task_spec(path)
    if image_size is None:
        if spec is None:
            raise DataError(f"`image_size` is required for a dataset without {SPEC_FILE}: {path}")
        image_size = spec.image_size
    if paired is None:
        paired = spec is not None

    dir_a, dir_b = DOMAIN_DIRS[split]
    names_a, images_a = load_png_dir(fs.join(path, dir_a), image_size)
    names_b, images_b = load_png_dir(fs.join(path, dir_b), image_size)

    masks = None
    mask_dir = fs.join(path, MASK_DIR)
    if fs.exists(mask_dir):
        mask_files = [fs.join(mask_dir, f"{split}_{name}") for name in names_a]
        missing = [f for f in mask_files if not fs.exists(f)]
        if missing:
            raise DataError(f"{len(missing)} mask(s) missing in {mask_dir}", files=missing)
        masks = torch.stack([load_mask(f, image_size) for f in mask_files])

    return TranslationDataset(
        images_a=images_a,
        images_b=images_b,
        masks=masks,
        paired=paired,
        names_a=names_a,
        names_b=names_b,
    )
