from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import torch
from loguru import logger
from torch import Tensor

from relgan.autodiff.ops import backward, zero_grad
from relgan.errors import PrecisionError

# Denominator floor of the relative error, so that vanishing gradients are compared absolutely.
REL_ERROR_FLOOR = 1e-3


@dataclass
class GradEntry:
    param: str
    index: int
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class CheckReport:
    r"""
    Outcome of a central-difference gradient check.

    Parameters:
        passed: whether `max_rel_error <= tol`
        max_rel_error: the worst relative error over all checked entries
        worst: the entry reaching `max_rel_error`, if any entry was checked
        n_checked: number of parameter entries compared
        tol: tolerance the check was run with
    """

    passed: bool
    max_rel_error: float
    tol: float
    n_checked: int
    worst: Optional[GradEntry] = None
    per_param: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = (
            f"{status}: max relative error {self.max_rel_error:.3e} (tol {self.tol:.1e}) "
            f"over {self.n_checked} entries"
        )
        if self.worst is not None:
            w = self.worst
            msg += (
                f"; worst entry `{w.param}`[{w.index}]: analytic {w.analytic:.10e}, numeric {w.numeric:.10e}"
            )
        return msg


def _named(params: Union[Mapping[str, Tensor], Sequence[Tensor]]) -> List[tuple]:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(f"param_{ii}", p) for ii, p in enumerate(params)]


def relative_error(analytic: float, numeric: float, floor: float = REL_ERROR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Union[Mapping[str, Tensor], Sequence[Tensor]],
    h: float = 1e-6,
    tol: float = 1e-5,
    floor: float = REL_ERROR_FLOOR,
) -> CheckReport:
    r"""
    Compare the analytic gradient of a scalar function against central differences
    `(f(p + h) - f(p - h)) / 2h`, entry by entry.

    Parameters:
        f: closure re-evaluating the scalar loss from the current parameter values
        params: the leaf tensors to check, as a list or a name → tensor mapping
        h: finite-difference step, must be positive
        tol: maximal relative error allowed
        floor: denominator floor of the relative error

    Returns:
        The `CheckReport`, locating the worst entry.
    """
    if h <= 0:
        raise ValueError(f"Finite-difference step must be positive, provided {h}")
    named = _named(params)
    for name, p in named:
        if p.dtype != torch.float64:
            raise PrecisionError(
                f"Gradient checks require double precision, `{name}` is {p.dtype}. "
                "Build the fixture inside `precision('double')`."
            )

    tensors = [p for _, p in named]
    zero_grad(tensors)
    backward(f())
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in tensors]
    zero_grad(tensors)

    report = CheckReport(passed=True, max_rel_error=0.0, tol=tol, n_checked=0)
    with torch.no_grad():
        for (name, p), grad in zip(named, analytic):
            flat = p.detach().view(-1)
            grad = grad.view(-1)
            worst_here = 0.0
            for ii in range(flat.numel()):
                orig = flat[ii].item()
                flat[ii] = orig + h
                f_plus = f().item()
                flat[ii] = orig - h
                f_minus = f().item()
                flat[ii] = orig
                numeric = (f_plus - f_minus) / (2 * h)
                err = relative_error(grad[ii].item(), numeric, floor)
                report.n_checked += 1
                worst_here = max(worst_here, err)
                if report.worst is None or err > report.max_rel_error:
                    report.max_rel_error = err
                    report.worst = GradEntry(name, ii, grad[ii].item(), numeric, err)
            report.per_param[name] = worst_here

    report.passed = report.max_rel_error <= tol
    logger.debug(report.summary())
    return report
