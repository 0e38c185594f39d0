r"""
Loss algebra of the generator quartet: the transitive (cycle) terms, the two
relative terms, the adversarial terms and their weighted totals.
"""

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, fields
from typing import Callable, Dict, Tuple

import torch
from torch import Tensor

from relgan.autodiff import ops
from relgan.errors import LossTermError, NonFiniteLossError, PairingError, ShapeError
from relgan.nn.quartet import GeneratorQuartet
from relgan.trainer.schedule import PhaseState, active_terms

NORM_KINDS = ("mean_abs", "mean_square")
PAIRING_POLICIES = ("off", "minibatch")
ADVERSARIAL_MODES = ("non_saturating", "minimax")

Network = Callable[[Tensor], Tensor]


@dataclass
class LossWeights:
    lambda_adv: float = 1.0
    lambda_tl: float = 10.0
    lambda_rel1: float = 1.0
    lambda_rel2: float = 1.0


@dataclass
class LossNorms:
    r"""
    Reduction used by each family of distance terms, "mean_abs" (L1, default)
    or "mean_square" (L2).
    """

    tl: str = "mean_abs"
    rel1: str = "mean_abs"
    rel2: str = "mean_abs"


@dataclass
class ObjectiveOptions:
    r"""
    Parameters:
        norms: reduction of each distance term
        paired: whether the A and B batches are true pairs
        rel1_pairing: "off" or "minibatch", how ReL₁ treats unpaired batches
        adversarial_mode: "non_saturating" (-log D(G(x))) or "minimax" (log(1 - D(G(x))))
        drop_rel1_after_transition: remove ReL₁ from the total once ReL₂ is active
    """

    norms: LossNorms = None
    paired: bool = True
    rel1_pairing: str = "off"
    adversarial_mode: str = "non_saturating"
    drop_rel1_after_transition: bool = False

    def __post_init__(self):
        if self.norms is None:
            self.norms = LossNorms()
        if self.rel1_pairing not in PAIRING_POLICIES:
            raise ValueError(
                f"Unknown pairing policy `{self.rel1_pairing}`, expected one of {PAIRING_POLICIES}"
            )
        if self.adversarial_mode not in ADVERSARIAL_MODES:
            raise ValueError(
                f"Unknown adversarial mode `{self.adversarial_mode}`, expected one of {ADVERSARIAL_MODES}"
            )


@dataclass
class LossReport:
    r"""
    Every term of the objective for one step, as scalar tensors. `total_g` and
    `total_d` keep their tape, the other fields may too.
    """

    adv_d_a: Tensor
    adv_d_b: Tensor
    adv_g_ab: Tensor
    adv_g_ba: Tensor
    tl_a: Tensor
    tl_b: Tensor
    rel1_b: Tensor
    rel1_a: Tensor
    rel2_b: Tensor
    rel2_a: Tensor
    total_g: Tensor
    total_d: Tensor

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_floats(self) -> Dict[str, float]:
        return {name: float(getattr(self, name).detach()) for name in self.field_names()}

    def to_json(self) -> str:
        return json.dumps(self.as_floats())

    def check_finite(self) -> None:
        """Raise `NonFiniteLossError` naming the first term that is NaN or infinite."""
        for name, value in self.as_floats().items():
            if not math.isfinite(value):
                raise NonFiniteLossError(name, f"non-finite value {value}")


def _check_norm(norm: str) -> None:
    if norm not in NORM_KINDS:
        raise ValueError(f"Unknown norm `{norm}`, expected one of {NORM_KINDS}")


def distance(x: Tensor, y: Tensor, norm: str = "mean_abs", op: str = "distance") -> Tensor:
    """`reduce(x - y)` for two tensors of identical shape."""
    _check_norm(norm)
    if x.shape != y.shape:
        raise ShapeError(op, x.shape, y.shape)
    return ops.reduce(ops.sub(x, y), norm)


def cycle_loss(a: Tensor, g_fwd: Network, g_back: Network, norm: str = "mean_abs") -> Tensor:
    r"""
    Transitive (cycle) term $\|a - g_{back}(g_{fwd}(a))\|$. With a primed `g_back`,
    this is the TL term of the disjoint objective.
    """
    return distance(a, g_back(g_fwd(a)), norm, op="cycle_loss")


def rel1_pairing_mode(paired: bool, policy: str = "off") -> str:
    r"""
    How ReL₁ may be evaluated: "paired" for true pairs, else the unpaired policy,
    "minibatch" (co-sampled B) or "off" (unavailable).
    """
    if policy not in PAIRING_POLICIES:
        raise ValueError(f"Unknown pairing policy `{policy}`, expected one of {PAIRING_POLICIES}")
    return "paired" if paired else policy


def rel1_loss(b: Tensor, fake_b: Tensor, norm: str = "mean_abs", pairing: str = "paired") -> Tensor:
    r"""
    First relative term $\|b - G_{AB}(a)\|$, defined only when `b` is aligned with
    the batch `fake_b` was translated from.

    Parameters:
        pairing: "paired", "minibatch" or "off". Only "off" is refused.
    """
    if pairing == "off":
        raise PairingError(
            "ReL₁ needs a B aligned with A: use paired data or set `rel1_pairing` to 'minibatch'"
        )
    if pairing not in ("paired", "minibatch"):
        raise ValueError(f"Unknown pairing `{pairing}`")
    return distance(b, fake_b, norm, op="rel1_loss")


def rel2_loss(fake_b: Tensor, refake_b: Tensor, norm: str = "mean_abs") -> Tensor:
    r"""
    Second relative term $\|G_{AB}(a) - G'_{AB}(G_{BA}(b))\|$. Gradients flow into
    the generators of both factors.
    """
    return distance(fake_b, refake_b, norm, op="rel2_loss")


def _probabilities(d: Network, x: Tensor, term: str) -> Tensor:
    p = d(x)
    if torch.isnan(p).any():
        raise LossTermError(term, "discriminator returned NaN probabilities")
    return p


def discriminator_loss(d: Network, real: Tensor, fake: Tensor) -> Tensor:
    r"""$-\mathrm{mean}\log d(real) - \mathrm{mean}\log(1 - d(fake))$, `fake` detached from the generators."""
    p_real = _probabilities(d, real, "adv_d")
    p_fake = _probabilities(d, fake.detach(), "adv_d")
    p_fake = p_fake.clamp(ops.LOG_EPS, 1.0 - ops.LOG_EPS)
    real_term = ops.mul(ops.reduce(p_real, "log_mean"), -1.0)
    return ops.sub(real_term, ops.reduce(ops.sub(1.0, p_fake), "log_mean"))


def generator_adversarial_loss(d: Network, fake: Tensor, mode: str = "non_saturating") -> Tensor:
    r"""
    Generator side of the adversarial game, `fake` attached to its generator:
    $-\mathrm{mean}\log d(fake)$ (non-saturating) or $\mathrm{mean}\log(1 - d(fake))$ (minimax).
    """
    p_fake = _probabilities(d, fake, "adv_g")
    if mode == "non_saturating":
        return ops.mul(ops.reduce(p_fake, "log_mean"), -1.0)
    if mode == "minimax":
        p_fake = p_fake.clamp(ops.LOG_EPS, 1.0 - ops.LOG_EPS)
        return ops.reduce(ops.sub(1.0, p_fake), "log_mean")
    raise ValueError(f"Unknown adversarial mode `{mode}`, expected one of {ADVERSARIAL_MODES}")


def adversarial_losses(
    d: Network, real: Tensor, fake: Tensor, mode: str = "non_saturating"
) -> Tuple[Tensor, Tensor]:
    """Returns `(d_loss, g_loss)` for one discriminator."""
    return discriminator_loss(d, real, fake), generator_adversarial_loss(d, fake, mode)


@contextmanager
def _term(name: str):
    try:
        yield
    except LossTermError:
        raise
    except Exception as e:
        raise LossTermError(name, str(e)) from e


def total_objective(
    quartet: GeneratorQuartet,
    a: Tensor,
    b: Tensor,
    weights: LossWeights,
    phase: PhaseState,
    options: ObjectiveOptions = None,
) -> LossReport:
    r"""
    Evaluate every term of the objective in both directions.

    - TL: $\|A - G'_{BA}(G_{AB}(A))\|$ and $\|B - G'_{AB}(G_{BA}(B))\|$
    - ReL₁: $\|B - G_{AB}(A)\|$ and $\|A - G_{BA}(B)\|$
    - ReL₂: $\|G'_{AB}(G_{BA}(B)) - G_{AB}(A)\|$ and $\|G'_{BA}(G_{AB}(A)) - G_{BA}(B)\|$
    - adversarial terms of $D_A$ and $D_B$

    `total_g` sums the weighted terms active in `phase`; a term whose weight is 0
    is left out of the sum altogether. `total_d = adv_d_a + adv_d_b`. When ReL₁
    is unavailable (unpaired batches, pairing policy "off"), `rel1_*` are reported
    as 0 and never enter `total_g`.

    Parameters:
        quartet: the generators and discriminators
        a, b: batches of the two domains, same shape
        weights: the lambdas
        phase: state of the phase machine
        options: norms, pairing and adversarial settings
    """
    options = options or ObjectiveOptions()
    norms = options.norms
    if a.shape != b.shape:
        raise ShapeError(
            "total_objective", a.shape, b.shape, detail="A and B batches must have the same shape"
        )
    active = active_terms(phase, drop_rel1=options.drop_rel1_after_transition)
    pairing = rel1_pairing_mode(options.paired, options.rel1_pairing)

    with _term("generators"):
        routes = quartet(a, b)
    fake_b, fake_a, rec_a, rec_b = routes["fake_b"], routes["fake_a"], routes["rec_a"], routes["rec_b"]

    with _term("tl_a"):
        tl_a = distance(a, rec_a, norms.tl, op="tl_a")
    with _term("tl_b"):
        tl_b = distance(b, rec_b, norms.tl, op="tl_b")

    if pairing == "off":
        rel1_b = torch.zeros((), dtype=a.dtype, device=a.device)
        rel1_a = torch.zeros((), dtype=a.dtype, device=a.device)
    else:
        with _term("rel1_b"):
            rel1_b = rel1_loss(b, fake_b, norms.rel1, pairing=pairing)
        with _term("rel1_a"):
            rel1_a = rel1_loss(a, fake_a, norms.rel1, pairing=pairing)

    with _term("rel2_b"):
        rel2_b = rel2_loss(rec_b, fake_b, norms.rel2)
    with _term("rel2_a"):
        rel2_a = rel2_loss(rec_a, fake_a, norms.rel2)

    with _term("adv_b"):
        adv_d_b, adv_g_ab = adversarial_losses(quartet.d_b, b, fake_b, options.adversarial_mode)
    with _term("adv_a"):
        adv_d_a, adv_g_ba = adversarial_losses(quartet.d_a, a, fake_a, options.adversarial_mode)

    # Summation order: adv, tl, rel1, rel2
    total_g = None
    contributions = [
        ("adv", weights.lambda_adv, adv_g_ab, adv_g_ba),
        ("tl", weights.lambda_tl, tl_a, tl_b),
        ("rel1", weights.lambda_rel1, rel1_b, rel1_a),
        ("rel2", weights.lambda_rel2, rel2_b, rel2_a),
    ]
    for tag, weight, first, second in contributions:
        if weight == 0 or tag not in active or (tag == "rel1" and pairing == "off"):
            continue
        term = weight * (first + second)
        total_g = term if total_g is None else total_g + term
    if total_g is None:
        total_g = torch.zeros((), dtype=a.dtype, device=a.device)

    total_d = adv_d_a + adv_d_b

    return LossReport(
        adv_d_a=adv_d_a,
        adv_d_b=adv_d_b,
        adv_g_ab=adv_g_ab,
        adv_g_ba=adv_g_ba,
        tl_a=tl_a,
        tl_b=tl_b,
        rel1_b=rel1_b,
        rel1_a=rel1_a,
        rel2_b=rel2_b,
        rel2_a=rel2_a,
        total_g=total_g,
        total_d=total_d,
    )
