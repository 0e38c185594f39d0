import pathlib
from dataclasses import replace

import pytest

from relgan.data.synthetic import SyntheticTaskSpec
from relgan.nn.architectures import ArchConfig
from relgan.trainer.schedule import StagnationRule
from relgan.trainer.train_options import TaskOptions, TrainConfig

TEST_DIR_PATH = pathlib.Path(__file__).parent


def tiny_arch(**kwargs) -> ArchConfig:
    """16×16 RGB networks, small enough for a few CPU steps per test."""
    values = dict(
        channels=3,
        base_channels=4,
        n_blocks=1,
        image_size=16,
        normalization="instance_norm",
        generator="resnet",
        gen_activation="relu",
        disc_activation="leaky_relu",
        disc_layers=2,
    )
    values.update(kwargs)
    return ArchConfig(**values)


def tiny_task(**kwargs) -> SyntheticTaskSpec:
    values = dict(image_size=16, n_shapes=1, n_train=8, n_test=4, seed=3)
    values.update(kwargs)
    return SyntheticTaskSpec(**values)


def tiny_config(**kwargs) -> TrainConfig:
    r"""
    A double-precision configuration over the tiny task. Keyword arguments
    override `TrainConfig` fields.
    """
    cfg = TrainConfig(
        task=TaskOptions(kind="synthetic", synthetic=tiny_task()),
        arch=tiny_arch(),
        rule=StagnationRule(window=4, delta=0.01, patience=2),
        precision="double",
        batch_size=2,
        total_steps=6,
        seed=0,
        checkpoint_every=0,
        eval_every=0,
        eval_batch_size=4,
        progress=False,
    )
    return replace(cfg, **kwargs)


@pytest.fixture
def datadir(request):
    return TEST_DIR_PATH.absolute()


@pytest.fixture
def config_factory():
    return tiny_config
