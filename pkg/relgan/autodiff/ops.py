r"""
Validated tensor operations over the torch autograd tape.

Every function checks its operands before dispatching to torch, so that a shape
mismatch is reported with the operation name and both shapes, and every result
stays attached to the tape for `backward`.
"""

from typing import Iterable, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F
from torch import Tensor

from relgan.autodiff.precision import check_same_precision
from relgan.errors import ShapeError

Operand = Union[Tensor, float, int]

REDUCE_KINDS = ("mean_abs", "mean_square", "mean", "log_mean")

# Probabilities are clamped to [LOG_EPS, 1 - LOG_EPS] before any log.
LOG_EPS = 1e-7


def _as_tensor(x: Operand, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return torch.as_tensor(x, dtype=like.dtype, device=like.device)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> torch.Size:
    try:
        return torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ShapeError(op, a.shape, b.shape, detail="not broadcastable") from None


def _elementwise(op: str, a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise TypeError(f"`{op}` expects at least one tensor operand")
    like = a if isinstance(a, Tensor) else b
    a, b = _as_tensor(a, like), _as_tensor(b, like)
    check_same_precision(op, (a, b))
    _broadcast_shape(op, a, b)
    return a, b


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _elementwise("add", a, b)
    return torch.add(a, b)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _elementwise("sub", a, b)
    return torch.sub(a, b)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _elementwise("mul", a, b)
    return torch.mul(a, b)


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        torch.broadcast_shapes(x.shape, tuple(shape))
    except RuntimeError:
        raise ShapeError("broadcast_to", x.shape, shape) from None
    if torch.broadcast_shapes(x.shape, tuple(shape)) != torch.Size(shape):
        raise ShapeError("broadcast_to", x.shape, shape, detail="target does not contain the source")
    return x.expand(*shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    check_same_precision("matmul", (a, b))
    if a.dim() < 1 or b.dim() < 1:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands must have rank >= 1")
    inner_a = a.shape[-1]
    inner_b = b.shape[-2] if b.dim() > 1 else b.shape[0]
    if inner_a != inner_b:
        raise ShapeError("matmul", a.shape, b.shape, detail=f"inner dimensions {inner_a} != {inner_b}")
    return torch.matmul(a, b)


def _check_conv_operands(op: str, x: Tensor, weight: Tensor, bias: Optional[Tensor], in_dim: int):
    check_same_precision(op, [t for t in (x, weight, bias) if t is not None])
    if x.dim() != 4 or weight.dim() != 4:
        raise ShapeError(op, x.shape, weight.shape, detail="expected N×C×H×W input and a rank-4 kernel")
    if x.shape[1] != weight.shape[in_dim]:
        raise ShapeError(
            op,
            x.shape,
            weight.shape,
            detail=f"{x.shape[1]} input channels, kernel expects {weight.shape[in_dim]}",
        )
    if bias is not None:
        out_channels = weight.shape[1 - in_dim]
        if bias.dim() != 1 or bias.shape[0] != out_channels:
            raise ShapeError(
                op, weight.shape, bias.shape, detail="bias must have one entry per output channel"
            )


def conv2d(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    _check_conv_operands("conv2d", x, weight, bias, in_dim=1)
    k_h, k_w = weight.shape[-2:]
    if x.shape[2] + 2 * padding < k_h or x.shape[3] + 2 * padding < k_w:
        raise ShapeError("conv2d", x.shape, weight.shape, detail="kernel larger than the padded input")
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def conv_transpose2d(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    # kernel layout is (in_channels, out_channels, kH, kW)
    _check_conv_operands("conv_transpose2d", x, weight, bias, in_dim=0)
    return F.conv_transpose2d(x, weight, bias, stride=stride, padding=padding)


def pool2d(x: Tensor, kernel_size: int, stride: Optional[int] = None, kind: str = "avg") -> Tensor:
    if x.dim() != 4:
        raise ShapeError("pool2d", x.shape, (kernel_size, kernel_size), detail="expected N×C×H×W input")
    if x.shape[2] < kernel_size or x.shape[3] < kernel_size:
        raise ShapeError("pool2d", x.shape, (kernel_size, kernel_size), detail="window larger than input")
    if kind == "avg":
        return F.avg_pool2d(x, kernel_size, stride=stride)
    if kind == "max":
        return F.max_pool2d(x, kernel_size, stride=stride)
    raise ValueError(f"Unknown pooling kind `{kind}`, expected 'avg' or 'max'")


def relu(x: Tensor) -> Tensor:
    return torch.relu(x)


def tanh(x: Tensor) -> Tensor:
    return torch.tanh(x)


def sigmoid(x: Tensor) -> Tensor:
    return torch.sigmoid(x)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    return F.leaky_relu(x, negative_slope=slope)


def reduce(x: Tensor, kind: str = "mean_abs") -> Tensor:
    r"""
    Reduce a tensor to a scalar. This realizes the norm used by every
    consistency and relative loss term.

    Parameters:
        x: non-empty tensor
        kind:
            - "mean_abs": mean of |x| (default norm)
            - "mean_square": mean of x²
            - "mean": plain mean
            - "log_mean": mean of log(x), x being probabilities clamped to [1e-7, 1 - 1e-7]
    """
    if x.numel() == 0:
        raise ShapeError("reduce", x.shape, detail="cannot reduce an empty tensor")
    if kind == "mean_abs":
        return x.abs().mean()
    if kind == "mean_square":
        return (x * x).mean()
    if kind == "mean":
        return x.mean()
    if kind == "log_mean":
        return torch.log(x.clamp(LOG_EPS, 1.0 - LOG_EPS)).mean()
    raise ValueError(f"Unknown reduction `{kind}`, expected one of {REDUCE_KINDS}")


def backward(loss: Tensor) -> None:
    """
    Accumulate the adjoints of a scalar loss into the `grad` of every tensor on
    its tape with `requires_grad=True`. Repeated calls accumulate.
    """
    if loss.numel() != 1:
        raise ShapeError("backward", loss.shape, detail="loss must be a scalar")
    if not loss.requires_grad:
        raise ValueError("`backward`: the loss is not attached to a gradient tape")
    loss.reshape(()).backward()


def zero_grad(tensors: Iterable[Tensor]) -> None:
    """Clear accumulated gradients, so that the next `backward` starts from zero."""
    for t in tensors:
        t.grad = None
