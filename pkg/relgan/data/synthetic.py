r"""
Procedural two-domain task: ellipses over a shared background, filled with one
texture in domain A and another in domain B. Domain B is the exact translation of
domain A inside the shape mask, and identical to it outside.

Every sample is drawn from a numpy `PCG64` generator seeded with
`SeedSequence([seed, index])`, so a sample is a pure function of `(seed, index)`
and can be generated in any order.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor

TEXTURES = ("h_stripes", "v_stripes", "checker", "solid")
BACKGROUNDS = ("noise", "gradient")


@dataclass
class SyntheticTaskSpec:
    r"""
    Parameters:
        image_size: pixels per side, divisible by 4
        n_shapes: number of ellipses per image, from 1 to 3
        texture_a: fill texture of domain A
        texture_b: fill texture of domain B, different from `texture_a`
        background: "noise" (base color plus gaussian noise) or "gradient" (noiseless ramp)
        noise_sigma: standard deviation of the background noise
        seed: dataset seed
        n_train: number of training samples
        n_test: number of test samples, indexed after the training ones
    """

    image_size: int = 32
    n_shapes: int = 2
    texture_a: str = "solid"
    texture_b: str = "h_stripes"
    background: str = "noise"
    noise_sigma: float = 0.1
    seed: int = 0
    n_train: int = 200
    n_test: int = 50

    def __post_init__(self):
        check_task_spec(self)

    @property
    def stripe_width(self) -> int:
        return max(1, self.image_size // 8)

    def indices(self, split: str) -> range:
        if split == "train":
            return range(self.n_train)
        if split == "test":
            return range(self.n_train, self.n_train + self.n_test)
        raise ValueError(f"Unknown split `{split}`, expected 'train' or 'test'")


def check_task_spec(spec: SyntheticTaskSpec) -> None:
    if spec.image_size < 4 or spec.image_size % 4 != 0:
        raise ValueError(f"Image size must be a positive multiple of 4, provided {spec.image_size}")
    if not 1 <= spec.n_shapes <= 3:
        raise ValueError(f"Number of shapes must be between 1 and 3, provided {spec.n_shapes}")
    for texture in (spec.texture_a, spec.texture_b):
        if texture not in TEXTURES:
            raise ValueError(f"Unknown texture `{texture}`, expected one of {TEXTURES}")
    if spec.texture_a == spec.texture_b:
        raise ValueError(f"The two domains need different textures, both are `{spec.texture_a}`")
    if spec.background not in BACKGROUNDS:
        raise ValueError(f"Unknown background `{spec.background}`, expected one of {BACKGROUNDS}")
    if spec.noise_sigma < 0:
        raise ValueError(f"Noise sigma must be >= 0, provided {spec.noise_sigma}")
    if spec.n_train < 1 or spec.n_test < 0:
        raise ValueError("`n_train` must be >= 1 and `n_test` >= 0")


@dataclass(frozen=True)
class Sample:
    r"""
    Parameters:
        image_a, image_b: C×H×W float32 tensors in [-1, 1]
        mask: H×W boolean foreground map
        paired: whether `image_b` is the translation of `image_a`
        index: position of the sample in its dataset
    """

    image_a: Tensor
    image_b: Tensor
    mask: Tensor
    paired: bool = True
    index: int = 0


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def texture_pattern(texture: str, size: int, width: int) -> np.ndarray:
    """H×W map of the texture's cells, 1 on the "on" cells and 0 on the others."""
    yy, xx = np.mgrid[0:size, 0:size]
    if texture == "h_stripes":
        return ((yy // width) % 2 == 0).astype(np.float64)
    if texture == "v_stripes":
        return ((xx // width) % 2 == 0).astype(np.float64)
    if texture == "checker":
        return (((yy // width) + (xx // width)) % 2 == 0).astype(np.float64)
    if texture == "solid":
        return np.ones((size, size))
    raise ValueError(f"Unknown texture `{texture}`, expected one of {TEXTURES}")


def _background(spec: SyntheticTaskSpec, rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    if spec.background == "noise":
        base = rng.uniform(-0.5, 0.5, size=(3, 1, 1))
        noise = rng.normal(0.0, spec.noise_sigma, size=(3, size, size))
        return np.clip(base + noise, -1.0, 1.0)
    start, end = rng.uniform(-0.8, 0.8, size=(2, 3, 1, 1))
    ramp = np.linspace(0.0, 1.0, size).reshape(1, 1, size)
    return np.broadcast_to(start + (end - start) * ramp, (3, size, size)).copy()


def _ellipse(size: int, rng: np.random.Generator) -> np.ndarray:
    cy, cx = rng.uniform(0.2, 0.8, size=2) * size
    ry, rx = rng.uniform(0.12, 0.3, size=2) * size
    angle = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    inside = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
    # the pixel holding the center always belongs to the shape
    inside[min(int(cy), size - 1), min(int(cx), size - 1)] = True
    return inside


def _shape_color(rng: np.random.Generator) -> np.ndarray:
    magnitude = rng.uniform(0.4, 0.9, size=3)
    sign = np.where(rng.uniform(size=3) < 0.5, -1.0, 1.0)
    return (magnitude * sign).reshape(3, 1, 1)


def generate_sample(spec: SyntheticTaskSpec, index: int) -> Sample:
    r"""
    Generate sample `index` of the task. The two images share background and
    geometry: every shape is painted with `texture_a` in `image_a` and with
    `texture_b` in `image_b`, patterned textures alternating the shape color and
    its negative.
    """
    rng = sample_rng(spec.seed, index)
    size = spec.image_size
    background = _background(spec, rng)
    image_a, image_b = background.copy(), background.copy()
    mask = np.zeros((size, size), dtype=bool)
    pattern_a = texture_pattern(spec.texture_a, size, spec.stripe_width)
    pattern_b = texture_pattern(spec.texture_b, size, spec.stripe_width)

    for _ in range(spec.n_shapes):
        inside = _ellipse(size, rng)
        color = _shape_color(rng)
        fill_a = color * (2.0 * pattern_a - 1.0)
        fill_b = color * (2.0 * pattern_b - 1.0)
        image_a = np.where(inside, fill_a, image_a)
        image_b = np.where(inside, fill_b, image_b)
        mask |= inside

    return Sample(
        image_a=torch.from_numpy(np.clip(image_a, -1.0, 1.0).astype(np.float32)),
        image_b=torch.from_numpy(np.clip(image_b, -1.0, 1.0).astype(np.float32)),
        mask=torch.from_numpy(mask),
        paired=True,
        index=int(index),
    )
