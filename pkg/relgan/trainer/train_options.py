r"""Data classes grouping together the arguments of a training run."""

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional

from relgan.data.synthetic import SyntheticTaskSpec
from relgan.nn.architectures import ArchConfig
from relgan.trainer.losses import LossNorms, LossWeights, ObjectiveOptions
from relgan.trainer.schedule import StagnationRule

TASK_KINDS = ("synthetic", "png")
PRECISIONS = ("single", "double")


@dataclass
class TaskOptions:
    r"""
    Where the training images come from.

    Parameters:
        kind: "synthetic" (generated in memory from `synthetic`) or "png"
            (a dataset directory at `data_dir`)
        synthetic: the synthetic task
        data_dir: dataset directory with `trainA/ trainB/` (and optionally
            `testA/ testB/ masks/`), mandatory for "png"
        image_size: size the PNG images are resized to, defaults to `arch.image_size`
    """

    kind: str = "synthetic"
    synthetic: SyntheticTaskSpec = field(default_factory=SyntheticTaskSpec)
    data_dir: Optional[str] = None
    image_size: Optional[int] = None


@dataclass
class OptimOptions:
    r"""
    Constants of the Adam optimizer, shared by every network.

    Parameters:
        lr: learning rate
        beta1, beta2: moment decay rates
        eps: denominator offset
    """

    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainConfig:
    r"""
    Everything a training run depends on. A run is a pure function of this
    configuration.

    Parameters:
        task: the training data
        arch: architecture of the six networks
        weights: the loss weights
        norms: reduction of the TL and relative terms
        rule: stagnation rule of the phase machine
        optim: Adam constants
        precision: "single" (float32) or "double" (float64)
        batch_size: images per batch and domain
        total_steps: number of generator steps
        seed: seed of the initialization and of the batch order
        paired: train on aligned (A, B) pairs, else on independently shuffled domains
        tied: tie the primed generators to the unprimed ones (two-generator CycleGAN)
        rel1_pairing: "off" or "minibatch", ReL₁ policy for unpaired batches
        adversarial_mode: "non_saturating" or "minimax" generator term
        d_steps_per_g: discriminator updates per generator update
        drop_rel1_after_transition: remove ReL₁ from the objective once ReL₂ joins
        checkpoint_every: steps between checkpoints, 0 for the final one only
        eval_every: steps between evaluations on the test split, 0 for the final one only
        eval_batch_size: translation batch size of the evaluations
        deterministic: request deterministic torch algorithms
        progress: show a progress bar
    """

    task: TaskOptions = field(default_factory=TaskOptions)
    arch: ArchConfig = field(default_factory=ArchConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    norms: LossNorms = field(default_factory=LossNorms)
    rule: StagnationRule = field(default_factory=StagnationRule)
    optim: OptimOptions = field(default_factory=OptimOptions)
    precision: str = "single"
    batch_size: int = 4
    total_steps: int = 2000
    seed: int = 0
    paired: bool = False
    tied: bool = False
    rel1_pairing: str = "off"
    adversarial_mode: str = "non_saturating"
    d_steps_per_g: int = 1
    drop_rel1_after_transition: bool = False
    checkpoint_every: int = 500
    eval_every: int = 0
    eval_batch_size: int = 16
    deterministic: bool = True
    progress: bool = True

    def objective_options(self) -> ObjectiveOptions:
        return ObjectiveOptions(
            norms=self.norms,
            paired=self.paired,
            rel1_pairing=self.rel1_pairing,
            adversarial_mode=self.adversarial_mode,
            drop_rel1_after_transition=self.drop_rel1_after_transition,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def model_fingerprint(self) -> Dict[str, Any]:
        """The settings a checkpoint must share with the configuration resuming from it."""
        return {"arch": asdict(self.arch), "tied": self.tied, "precision": self.precision}


def cyclegan_baseline(cfg: TrainConfig) -> TrainConfig:
    r"""
    The two-generator CycleGAN counterpart of a configuration: primed generators
    tied to the unprimed ones, both relative weights zeroed.
    """
    weights = replace(cfg.weights, lambda_rel1=0.0, lambda_rel2=0.0)
    return replace(cfg, tied=True, weights=weights)
