from contextlib import contextmanager
from enum import Enum
from typing import Iterable, Iterator, Union

import torch
from torch import Tensor

from relgan.errors import PrecisionError


class Precision(Enum):
    r"""
    Floating precision shared by every tensor of one computation graph.
    Training runs in `SINGLE`, gradient checks require `DOUBLE`.
    """

    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> torch.dtype:
        return torch.float32 if self is Precision.SINGLE else torch.float64

    @classmethod
    def parse(cls, value: Union[str, "Precision", torch.dtype]) -> "Precision":
        if isinstance(value, Precision):
            return value
        if isinstance(value, torch.dtype):
            return cls.from_dtype(value)
        aliases = {"single": cls.SINGLE, "32": cls.SINGLE, "float32": cls.SINGLE}
        aliases.update({"double": cls.DOUBLE, "64": cls.DOUBLE, "float64": cls.DOUBLE})
        key = str(value).lower()
        if key not in aliases:
            raise ValueError(f"Unknown precision `{value}`, expected one of {sorted(aliases)}")
        return aliases[key]

    @classmethod
    def from_dtype(cls, dtype: torch.dtype) -> "Precision":
        if dtype == torch.float32:
            return cls.SINGLE
        if dtype == torch.float64:
            return cls.DOUBLE
        raise PrecisionError(f"dtype {dtype} is not a supported floating precision")


def get_precision() -> Precision:
    return Precision.from_dtype(torch.get_default_dtype())


@contextmanager
def precision(mode: Union[str, Precision]) -> Iterator[Precision]:
    """
    Temporarily set torch's default floating dtype, so that networks and tensors
    created inside the block share one precision.

    Example:
        ```
        with precision("double"):
            net = build_generator(cfg)
        ```
    """
    mode = Precision.parse(mode)
    previous = torch.get_default_dtype()
    torch.set_default_dtype(mode.dtype)
    try:
        yield mode
    finally:
        torch.set_default_dtype(previous)


def check_same_precision(op: str, tensors: Iterable[Tensor]) -> torch.dtype:
    """Raise a `PrecisionError` if floating tensors mix precisions within one op."""
    dtypes = {t.dtype for t in tensors if isinstance(t, Tensor) and t.is_floating_point()}
    if len(dtypes) > 1:
        names = ", ".join(sorted(str(d) for d in dtypes))
        raise PrecisionError(f"`{op}`: tensors mix precisions ({names}); use a single precision mode")
    return dtypes.pop() if dtypes else torch.get_default_dtype()
