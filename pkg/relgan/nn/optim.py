from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import torch
from torch import Tensor

from relgan.errors import ShapeError


@dataclass
class AdamState:
    r"""
    Moment estimates of one network's parameters, keyed by parameter name.
    `steps` counts the updates each parameter received, for the bias correction.
    """

    m: Dict[str, Tensor] = field(default_factory=dict)
    v: Dict[str, Tensor] = field(default_factory=dict)
    steps: Dict[str, int] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[Tensor]],
    state: AdamState,
    lr: float = 2e-4,
    beta1: float = 0.5,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    r"""
    One Adam update with bias correction, in place:

    $$m \leftarrow \beta_1 m + (1 - \beta_1) g, \quad v \leftarrow \beta_2 v + (1 - \beta_2) g^2$$
    $$p \leftarrow p - \frac{lr}{1 - \beta_1^t} \frac{m}{\sqrt{v / (1 - \beta_2^t)} + \epsilon}$$

    A parameter whose gradient is `None` took no part in the loss and is skipped,
    its moments and step count left untouched.

    Parameters:
        params: name → parameter, updated in place
        grads: name → gradient (same shape as the parameter) or `None`
        state: the moments, advanced one step
    """
    with torch.no_grad():
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            if g.shape != p.shape:
                raise ShapeError("adam_step", p.shape, g.shape, detail=f"gradient of `{name}`")
            if name not in state.m:
                state.m[name] = torch.zeros_like(p)
                state.v[name] = torch.zeros_like(p)
                state.steps[name] = 0
            m, v = state.m[name], state.v[name]
            if m.shape != p.shape or v.shape != p.shape:
                raise ShapeError(
                    "adam_step", p.shape, m.shape, detail=f"optimizer state drifted for `{name}`"
                )

            state.steps[name] += 1
            t = state.steps[name]
            m.mul_(beta1).add_(g, alpha=1.0 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)

            bias_correction1 = 1.0 - beta1**t
            bias_correction2 = 1.0 - beta2**t
            denom = (v / bias_correction2).sqrt_().add_(eps)
            p.addcdiv_(m, denom, value=-lr / bias_correction1)


def network_grads(params: Mapping[str, Tensor]) -> Dict[str, Optional[Tensor]]:
    return {name: p.grad for name, p in params.items()}
