from copy import deepcopy
from typing import Callable, Optional, Type, Union

import torch
import torch.nn as nn
from torch import Tensor

from relgan.autodiff import ops

SUPPORTED_ACTIVATION_MAP = {
    "relu",
    "tanh",
    "sigmoid",
    "leaky_relu",
    "none",
}

LEAKY_SLOPE = 0.2


class Activation(nn.Module):
    r"""
    Element-wise activation dispatching to `relgan.autodiff.ops`.

    Parameters:
        name: one of "relu", "tanh", "sigmoid", "leaky_relu"
        slope: negative slope, only used by "leaky_relu"
    """

    def __init__(self, name: str, slope: float = LEAKY_SLOPE):
        super().__init__()
        if name not in ("relu", "tanh", "sigmoid", "leaky_relu"):
            raise ValueError(f"Unhandled activation function `{name}`")
        self.name = name
        self.slope = slope

    def forward(self, x: Tensor) -> Tensor:
        if self.name == "leaky_relu":
            return ops.leaky_relu(x, self.slope)
        return getattr(ops, self.name)(x)

    def extra_repr(self) -> str:
        return f"{self.name}" + (f", slope={self.slope}" if self.name == "leaky_relu" else "")


def get_activation(activation: Union[Type[None], str, Callable]) -> Optional[Callable]:
    r"""
    returns the activation function represented by the input string

    Parameters:
        activation: Callable, `None`, or string with value:
            "none", "relu", "tanh", "sigmoid", "leaky_relu"

    Returns:
        Callable or None: The activation function
    """
    if (activation is not None) and callable(activation):
        return activation

    if (activation is None) or (activation.lower() == "none"):
        return None

    name = activation.lower().replace("leakyrelu", "leaky_relu")
    if name not in SUPPORTED_ACTIVATION_MAP:
        raise ValueError(
            f"Unhandled activation function `{activation}`, "
            f"expected one of {sorted(SUPPORTED_ACTIVATION_MAP)}"
        )
    return Activation(name)


def get_norm(normalization: Union[Type[None], str, Callable], dim: Optional[int] = None):
    r"""
    returns the normalization layer represented by the input string

    Parameters:
        normalization: Callable, `None`, or string with value:
            "none", "instance_norm"
        dim: Number of channels to normalize. Mandatory for 'instance_norm'

    Returns:
        Callable or None: The normalization layer
    """
    parsed_norm = None
    if (normalization is None) or (normalization in ["none", "NoneType"]):
        pass
    elif callable(normalization):
        parsed_norm = normalization
    elif normalization in ["instance_norm", "InstanceNorm2d"]:
        # No affine parameters and no running statistics, as in CycleGAN
        parsed_norm = nn.InstanceNorm2d(dim, affine=False, track_running_stats=False)
    else:
        raise ValueError(
            f"Undefined normalization `{normalization}`, must be `None`, `Callable`, 'instance_norm', 'none'"
        )
    return deepcopy(parsed_norm)


class ConvLayer(nn.Module):
    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        activation: Union[str, Callable] = "relu",
        normalization: Union[str, Callable] = "none",
        transposed: bool = False,
        bias: bool = True,
    ):
        r"""
        A 2D (transposed) convolution, centered around a `torch.nn.Conv2d` or
        `torch.nn.ConvTranspose2d` holding the parameters. The order in which
        transformations are applied is:

        - Convolution
        - Normalization (if applicable)
        - Activation

        Parameters:
            in_dim: Number of input channels.
            out_dim: Number of output channels.
            kernel_size: Size of the square kernel.
            stride: Stride of the convolution.
            padding: Zero padding on each side.
            activation: Activation function to use.
            normalization: "none" or "instance_norm".
            transposed: Whether to use a transposed convolution (upsampling).
            bias: Whether to enable the bias.
        """
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.stride = stride
        self.padding = padding
        self.transposed = transposed

        conv_class = nn.ConvTranspose2d if transposed else nn.Conv2d
        self.conv = conv_class(in_dim, out_dim, kernel_size, stride=stride, padding=padding, bias=bias)
        self.normalization = get_norm(normalization, dim=out_dim)
        self.activation = get_activation(activation)

    def forward(self, h: Tensor) -> Tensor:
        conv = ops.conv_transpose2d if self.transposed else ops.conv2d
        h = conv(h, self.conv.weight, self.conv.bias, stride=self.stride, padding=self.padding)
        if self.normalization is not None:
            h = self.normalization(h)
        if self.activation is not None:
            h = self.activation(h)
        return h


class ResidualBlock(nn.Module):
    def __init__(
        self,
        dim: int,
        activation: Union[str, Callable] = "relu",
        normalization: Union[str, Callable] = "instance_norm",
    ):
        r"""
        Two 3×3 convolutions with a skip connection, `h + conv(conv(h))`.
        The second convolution has no activation, as in ResNet-style generators.
        """
        super().__init__()
        self.conv1 = ConvLayer(dim, dim, 3, padding=1, activation=activation, normalization=normalization)
        self.conv2 = ConvLayer(dim, dim, 3, padding=1, activation="none", normalization=normalization)

    def forward(self, h: Tensor) -> Tensor:
        return ops.add(h, self.conv2(self.conv1(h)))
