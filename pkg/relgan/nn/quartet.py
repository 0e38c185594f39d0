from typing import Dict, Iterator, List, Tuple

import torch.nn as nn
from torch import Tensor

from relgan.nn.architectures import ArchConfig, build_discriminator, build_generator, init_parameters

GENERATOR_NAMES = ("g_ab", "g_ba", "g_ab_prime", "g_ba_prime")
DISCRIMINATOR_NAMES = ("d_a", "d_b")
NETWORK_NAMES = GENERATOR_NAMES + DISCRIMINATOR_NAMES

# Seed offset of each network, so that g_ab and g_ba get the same weights in tied and untied quartets
SEED_OFFSETS = {
    name: ii for ii, name in enumerate(("g_ab", "g_ba", "d_a", "d_b", "g_ab_prime", "g_ba_prime"))
}


class GeneratorQuartet(nn.Module):
    def __init__(
        self,
        g_ab: nn.Module,
        g_ba: nn.Module,
        d_a: nn.Module,
        d_b: nn.Module,
        g_ab_prime: nn.Module = None,
        g_ba_prime: nn.Module = None,
    ):
        r"""
        The four generators and two discriminators of the objective.

        `g_ab: A → B'`, `g_ba: B → A'` translate, and the primed generators
        `g_ab_prime: A' → B''`, `g_ba_prime: B' → A''` close the cycles with their own
        parameters. Leaving the primed generators out ties them to the unprimed ones,
        which recovers a two-generator CycleGAN.

        Parameters:
            g_ab, g_ba: the translating generators
            d_a, d_b: patch discriminators of domains A and B
            g_ab_prime, g_ba_prime: the returning generators, or `None` to tie them
        """
        super().__init__()
        if (g_ab_prime is None) != (g_ba_prime is None):
            raise ValueError("Either both primed generators are provided, or none (tied quartet)")
        self.tied = g_ab_prime is None
        self.g_ab = g_ab
        self.g_ba = g_ba
        self.d_a = d_a
        self.d_b = d_b
        if not self.tied:
            self.g_ab_prime_net = g_ab_prime
            self.g_ba_prime_net = g_ba_prime

    @property
    def g_ab_prime(self) -> nn.Module:
        return self.g_ab if self.tied else self.g_ab_prime_net

    @property
    def g_ba_prime(self) -> nn.Module:
        return self.g_ba if self.tied else self.g_ba_prime_net

    def network(self, name: str) -> nn.Module:
        if name not in NETWORK_NAMES:
            raise KeyError(f"Unknown network `{name}`, expected one of {NETWORK_NAMES}")
        return getattr(self, name)

    def owned_generator_names(self) -> Tuple[str, ...]:
        """Names of the generators owning distinct parameters (two if tied, four otherwise)."""
        return GENERATOR_NAMES[:2] if self.tied else GENERATOR_NAMES

    def owned_network_names(self) -> Tuple[str, ...]:
        return self.owned_generator_names() + DISCRIMINATOR_NAMES

    def generators(self) -> List[nn.Module]:
        return [self.network(name) for name in self.owned_generator_names()]

    def discriminators(self) -> List[nn.Module]:
        return [self.d_a, self.d_b]

    def named_network_parameters(self, name: str) -> Dict[str, Tensor]:
        return dict(self.network(name).named_parameters())

    def generator_parameters(self) -> Iterator[Tensor]:
        for net in self.generators():
            yield from net.parameters()

    def discriminator_parameters(self) -> Iterator[Tensor]:
        for net in self.discriminators():
            yield from net.parameters()

    def forward(self, a: Tensor, b: Tensor) -> Dict[str, Tensor]:
        """Both translation routes, in the order the objective evaluates them."""
        fake_b = self.g_ab(a)
        fake_a = self.g_ba(b)
        rec_a = self.g_ba_prime(fake_b)
        rec_b = self.g_ab_prime(fake_a)
        return {"fake_b": fake_b, "fake_a": fake_a, "rec_a": rec_a, "rec_b": rec_b}


def build_quartet(arch: ArchConfig, tied: bool = False, seed: int = 0) -> GeneratorQuartet:
    r"""
    Build and initialize a quartet. Network `k` is initialized with `seed + offset_k`,
    the offsets of g_ab, g_ba, d_a, d_b being shared by tied and untied quartets.
    """
    nets = {}
    names = ("g_ab", "g_ba", "d_a", "d_b") + (() if tied else ("g_ab_prime", "g_ba_prime"))
    for name in names:
        build = build_discriminator if name.startswith("d_") else build_generator
        nets[name] = build(arch, name=name)
        init_parameters(nets[name], seed + SEED_OFFSETS[name])
    return GeneratorQuartet(**nets)
