r"""
Gradient checks of the loss terms on tiny double-precision fixtures: one channel,
4×4 images, two-channel networks with smooth activations.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import torch
from loguru import logger
from torch import Tensor

from relgan.autodiff.gradcheck import CheckReport, finite_difference_check
from relgan.autodiff.precision import precision
from relgan.nn.architectures import ArchConfig, init_parameters
from relgan.nn.quartet import SEED_OFFSETS, GeneratorQuartet, build_quartet
from relgan.trainer.losses import (
    LossWeights,
    ObjectiveOptions,
    discriminator_loss,
    distance,
    generator_adversarial_loss,
    rel1_loss,
    rel2_loss,
    total_objective,
)
from relgan.trainer.schedule import Phase, PhaseState

GRADCHECK_LOSSES = ("tl", "rel1", "rel2", "adv")
FIXTURE_INIT_STD = 0.5
BUG_FACTOR = 1.5


def fixture_arch() -> ArchConfig:
    return ArchConfig(
        channels=1,
        base_channels=2,
        n_blocks=1,
        image_size=4,
        normalization="none",
        generator="resnet",
        gen_activation="tanh",
        disc_activation="tanh",
        disc_layers=1,
    )


@dataclass
class GradcheckFixture:
    quartet: GeneratorQuartet
    a: Tensor
    b: Tensor


def build_fixture(seed: int = 0, inject_bug: bool = False) -> GradcheckFixture:
    r"""
    An untied quartet in double precision and one 1×1×4×4 input per domain.
    Weights are drawn wider than for training, so that every layer works away
    from its linear regime.

    Parameters:
        seed: seed of the weights and inputs
        inject_bug: scale the gradient reaching every `g_ab` parameter by 1.5,
            so that the check must fail
    """
    with precision("double"):
        quartet = build_quartet(fixture_arch(), tied=False, seed=seed)
        for name in quartet.owned_network_names():
            init_parameters(quartet.network(name), seed + SEED_OFFSETS[name], std=FIXTURE_INIT_STD)
        generator = torch.Generator().manual_seed(seed + 1000)
        a = torch.rand((1, 1, 4, 4), generator=generator, dtype=torch.float64) * 2.0 - 1.0
        b = torch.rand((1, 1, 4, 4), generator=generator, dtype=torch.float64) * 2.0 - 1.0
    if inject_bug:
        for p in quartet.g_ab.parameters():
            p.register_hook(lambda g: g * BUG_FACTOR)
    return GradcheckFixture(quartet=quartet, a=a, b=b)


def _params(quartet: GeneratorQuartet, names) -> Dict[str, Tensor]:
    return {
        f"{net}/{param}": p
        for net in names
        for param, p in quartet.network(net).named_parameters()
    }


def loss_checks(
    fixture: GradcheckFixture,
) -> Dict[str, List[Tuple[str, Callable[[], Tensor], Dict[str, Tensor]]]]:
    r"""
    For every loss family, the `(label, closure, parameters)` triples to check.
    The adversarial family is checked from both sides: the generator terms with
    respect to G_AB and G_BA, the discriminator terms with respect to D_A and D_B.
    """
    q, a, b = fixture.quartet, fixture.a, fixture.b
    generators = q.owned_generator_names()

    def tl():
        routes = q(a, b)
        return distance(a, routes["rec_a"]) + distance(b, routes["rec_b"])

    def rel1():
        return rel1_loss(b, q.g_ab(a)) + rel1_loss(a, q.g_ba(b))

    def rel2():
        routes = q(a, b)
        return rel2_loss(routes["rec_b"], routes["fake_b"]) + rel2_loss(routes["rec_a"], routes["fake_a"])

    def adv_g():
        return generator_adversarial_loss(q.d_b, q.g_ab(a)) + generator_adversarial_loss(q.d_a, q.g_ba(b))

    def adv_d():
        return discriminator_loss(q.d_a, a, q.g_ba(b)) + discriminator_loss(q.d_b, b, q.g_ab(a))

    return {
        "tl": [("tl", tl, _params(q, generators))],
        "rel1": [("rel1", rel1, _params(q, ("g_ab", "g_ba")))],
        "rel2": [("rel2", rel2, _params(q, generators))],
        "adv": [
            ("adv_g", adv_g, _params(q, ("g_ab", "g_ba"))),
            ("adv_d", adv_d, _params(q, ("d_a", "d_b"))),
        ],
    }


def total_check(fixture: GradcheckFixture) -> Tuple[str, Callable[[], Tensor], Dict[str, Tensor]]:
    """`total_g` with every term active, with respect to every generator parameter."""
    q, a, b = fixture.quartet, fixture.a, fixture.b
    phase = PhaseState(phase=Phase.TL_REL1_REL2)

    def total():
        return total_objective(q, a, b, LossWeights(), phase, ObjectiveOptions(paired=True)).total_g

    return "total_g", total, _params(q, q.owned_generator_names())


def run_gradcheck(
    loss: str = "all", tol: float = 1e-5, h: float = 1e-6, seed: int = 0, inject_bug: bool = False
) -> List[Tuple[str, CheckReport]]:
    r"""
    Check the selected loss family ("all" checks every family and `total_g`).

    Returns:
        `(label, report)` pairs; the check passes iff every report passed
    """
    if loss != "all" and loss not in GRADCHECK_LOSSES:
        raise ValueError(f"Unknown loss `{loss}`, expected 'all' or one of {GRADCHECK_LOSSES}")
    fixture = build_fixture(seed=seed, inject_bug=inject_bug)
    checks = loss_checks(fixture)
    selected = []
    for family in GRADCHECK_LOSSES if loss == "all" else (loss,):
        selected.extend(checks[family])
    if loss == "all":
        selected.append(total_check(fixture))

    results = []
    for label, closure, params in selected:
        report = finite_difference_check(closure, params, h=h, tol=tol)
        logger.info(f"gradcheck {label}: {report.summary()}")
        results.append((label, report))
    return results
