"""
Exceptions raised across relgan. Plain argument misuse still raises the built-in
`ValueError`/`TypeError`; the classes below mark failures of the domain contracts.
"""

from typing import Iterable, Optional


class RelganError(Exception):
    """Base class of all relgan errors."""


class ShapeError(RelganError, ValueError):
    def __init__(self, op: str, *shapes, detail: str = ""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        shapes_str = " and ".join(str(list(s)) for s in self.shapes)
        msg = f"`{op}`: incompatible shapes {shapes_str}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class PrecisionError(RelganError):
    pass


class GradCheckError(RelganError):
    pass


class LossTermError(RelganError):
    def __init__(self, term: str, message: str):
        self.term = term
        super().__init__(f"loss term `{term}`: {message}")


class NonFiniteLossError(LossTermError):
    pass


class PairingError(RelganError):
    pass


class PhaseError(RelganError, ValueError):
    pass


class DataError(RelganError):
    def __init__(self, message: str, files: Optional[Iterable[str]] = None):
        self.files = list(files) if files is not None else []
        if self.files:
            message = message + "\n" + "\n".join(f"  - {f}" for f in self.files)
        super().__init__(message)


class MetricError(RelganError):
    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        if index is not None:
            message = f"sample {index}: {message}"
        super().__init__(message)


class ConfigError(RelganError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


class CheckpointError(RelganError):
    pass
