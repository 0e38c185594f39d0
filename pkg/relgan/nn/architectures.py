"""
Generator and discriminator architectures of the quartet. The default is a
down-scaled CycleGAN: a ResNet generator and a PatchGAN discriminator.
"""

from dataclasses import dataclass
from typing import List

import torch
import torch.nn as nn
from torch import Tensor

from relgan.errors import ShapeError
from relgan.nn.base_layers import ConvLayer, ResidualBlock

GENERATOR_KINDS = ("resnet", "identity")

INIT_STD = 0.02


@dataclass
class ArchConfig:
    r"""
    Parameters:
        channels: image channels (3 for RGB)
        base_channels: width of the first encoder layer, doubled once per downsampling
        n_blocks: number of residual blocks at the bottleneck (>= 0)
        image_size: spatial size of the square images, divisible by 4
        normalization: "instance_norm" or "none", applied after the hidden convolutions
        generator: "resnet" or "identity" (parameter-free pass-through)
        gen_activation: hidden activation of the generator
        disc_activation: hidden activation of the discriminator
        disc_layers: number of stride-2 layers of the discriminator
    """

    channels: int = 3
    base_channels: int = 16
    n_blocks: int = 2
    image_size: int = 32
    normalization: str = "instance_norm"
    generator: str = "resnet"
    gen_activation: str = "relu"
    disc_activation: str = "leaky_relu"
    disc_layers: int = 3


def check_arch(cfg: ArchConfig) -> None:
    if cfg.image_size % 4 != 0:
        raise ValueError(f"Image size must be divisible by 4, provided {cfg.image_size}")
    if cfg.n_blocks < 0:
        raise ValueError(f"Residual-block count must be >= 0, provided {cfg.n_blocks}")
    if cfg.channels < 1 or cfg.base_channels < 1:
        raise ValueError("`channels` and `base_channels` must be positive")
    if cfg.generator not in GENERATOR_KINDS:
        raise ValueError(f"Unknown generator kind `{cfg.generator}`, expected one of {GENERATOR_KINDS}")
    if cfg.disc_layers < 1 or cfg.image_size < 2**cfg.disc_layers:
        raise ValueError(
            f"A discriminator with {cfg.disc_layers} stride-2 layers needs images of at least "
            f"{2 ** cfg.disc_layers} pixels, provided {cfg.image_size}"
        )


def _check_input(name: str, x: Tensor, channels: int, multiple: int) -> None:
    if x.dim() != 4 or x.shape[1] != channels:
        raise ShapeError(name, x.shape, (-1, channels, -1, -1), detail="expected an N×C×H×W batch")
    if x.shape[2] % multiple != 0 or x.shape[3] % multiple != 0:
        raise ShapeError(name, x.shape, detail=f"spatial size must be divisible by {multiple}")


class ResnetGenerator(nn.Module):
    def __init__(self, cfg: ArchConfig, name: str = "generator"):
        r"""
        Encoder (2 stride-2 convolutions) → `n_blocks` residual blocks → decoder
        (2 transposed convolutions) → tanh. The output has the input's shape, with
        values in [-1, 1].
        """
        super().__init__()
        check_arch(cfg)
        self.name = name
        self.channels = cfg.channels
        c, act, norm = cfg.base_channels, cfg.gen_activation, cfg.normalization
        self.encoder = nn.Sequential(
            ConvLayer(cfg.channels, c, 3, stride=2, padding=1, activation=act, normalization=norm),
            ConvLayer(c, 2 * c, 3, stride=2, padding=1, activation=act, normalization=norm),
        )
        self.blocks = nn.Sequential(
            *[ResidualBlock(2 * c, activation=act, normalization=norm) for _ in range(cfg.n_blocks)]
        )
        self.decoder = nn.Sequential(
            ConvLayer(2 * c, c, 4, stride=2, padding=1, activation=act, normalization=norm, transposed=True),
            ConvLayer(c, cfg.channels, 4, stride=2, padding=1, activation="tanh", transposed=True),
        )

    def forward(self, x: Tensor) -> Tensor:
        _check_input(self.name, x, self.channels, 4)
        return self.decoder(self.blocks(self.encoder(x)))


class IdentityGenerator(nn.Module):
    """Parameter-free generator returning its input."""

    def __init__(self, cfg: ArchConfig, name: str = "generator"):
        super().__init__()
        self.name = name
        self.channels = cfg.channels

    def forward(self, x: Tensor) -> Tensor:
        _check_input(self.name, x, self.channels, 1)
        return x


class PatchDiscriminator(nn.Module):
    def __init__(self, cfg: ArchConfig, name: str = "discriminator"):
        r"""
        `disc_layers` stride-2 convolutions with leaky ReLU, followed by a 1-channel
        3×3 convolution and a sigmoid. Each output pixel is the probability that the
        corresponding input patch is real; a 32×32 input gives a 4×4 patch map with
        the default 3 layers.
        """
        super().__init__()
        check_arch(cfg)
        self.name = name
        self.channels = cfg.channels
        self.n_layers = cfg.disc_layers
        layers: List[nn.Module] = []
        in_dim, out_dim = cfg.channels, cfg.base_channels
        for ii in range(cfg.disc_layers):
            norm = "none" if ii == 0 else cfg.normalization
            layers.append(
                ConvLayer(
                    in_dim,
                    out_dim,
                    4,
                    stride=2,
                    padding=1,
                    activation=cfg.disc_activation,
                    normalization=norm,
                )
            )
            in_dim, out_dim = out_dim, 2 * out_dim
        layers.append(ConvLayer(in_dim, 1, 3, stride=1, padding=1, activation="sigmoid"))
        self.layers = nn.Sequential(*layers)

    def patch_shape(self, height: int, width: int):
        return height // 2**self.n_layers, width // 2**self.n_layers

    def forward(self, x: Tensor) -> Tensor:
        _check_input(self.name, x, self.channels, 2**self.n_layers)
        return self.layers(x)


def build_generator(cfg: ArchConfig, name: str = "generator") -> nn.Module:
    check_arch(cfg)
    if cfg.generator == "identity":
        return IdentityGenerator(cfg, name=name)
    return ResnetGenerator(cfg, name=name)


def build_discriminator(cfg: ArchConfig, name: str = "discriminator") -> PatchDiscriminator:
    return PatchDiscriminator(cfg, name=name)


def init_parameters(net: nn.Module, seed: int, std: float = INIT_STD) -> None:
    r"""
    Draw every convolution kernel from N(0, std²) and zero every bias, from a
    generator seeded with `seed`. Parameters are visited in `named_parameters`
    order, so the result is a pure function of the seed and the architecture.
    """
    generator = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for name, param in net.named_parameters():
            if param.dim() > 1:
                sample = torch.randn(param.shape, generator=generator, dtype=torch.float64) * std
                param.copy_(sample.to(param.dtype))
            else:
                param.zero_()
