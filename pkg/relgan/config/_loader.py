r"""
Loading and validation of JSON configurations.

A file is parsed with `json`, merged onto the structured schema of its dataclass
(so omegaconf rejects unknown keys and ill-typed values), checked semantically,
then converted to the dataclass. Every failure is a `ConfigError` carrying the
JSON pointer of the offending key.
"""

import json
import math
import os
from typing import Any, Callable, Dict, Mapping, Type, TypeVar, Union

from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from relgan.data.synthetic import BACKGROUNDS, TEXTURES, SyntheticTaskSpec
from relgan.errors import ConfigError
from relgan.nn.architectures import GENERATOR_KINDS
from relgan.nn.base_layers import SUPPORTED_ACTIVATION_MAP
from relgan.trainer.losses import ADVERSARIAL_MODES, NORM_KINDS, PAIRING_POLICIES
from relgan.trainer.train_options import PRECISIONS, TASK_KINDS, TrainConfig
from relgan.utils import fs

T = TypeVar("T")
PathLike = Union[str, os.PathLike]

NORMALIZATIONS = ("instance_norm", "none")


def json_pointer(full_key: str) -> str:
    """omegaconf's dotted key (`weights.lambda_tl`, `a[0]`) → RFC 6901 pointer (`/weights/lambda_tl`)."""
    if not full_key:
        return ""
    parts = []
    for part in str(full_key).replace("[", ".").replace("]", "").split("."):
        if part:
            parts.append(part.replace("~", "~0").replace("/", "~1"))
    return "/" + "/".join(parts)


def read_json(path: PathLike) -> Dict[str, Any]:
    if not fs.exists(path):
        raise ConfigError("", f"configuration file does not exist: {path}")
    try:
        values = json.loads(fs.read_text(path))
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON in {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError("", f"the configuration in {path} must be a JSON object")
    return values


def _structured(schema: Type[T], values: Mapping[str, Any], validate: Callable[[DictConfig], None]) -> T:
    try:
        merged = OmegaConf.merge(OmegaConf.structured(schema), OmegaConf.create(dict(values)))
    except OmegaConfBaseException as e:
        raise ConfigError(
            json_pointer(getattr(e, "full_key", "") or ""), getattr(e, "msg", None) or str(e)
        ) from e
    validate(merged)
    try:
        return OmegaConf.to_object(merged)
    except (OmegaConfBaseException, ValueError) as e:
        raise ConfigError(json_pointer(getattr(e, "full_key", "") or ""), str(e)) from e


def _require(condition: bool, pointer: str, message: str) -> None:
    if not condition:
        raise ConfigError(pointer, message)


def _one_of(value, choices, pointer: str) -> None:
    _require(value in choices, pointer, f"`{value}` is not one of {list(choices)}")


def validate_task_spec(spec: DictConfig, prefix: str = "") -> None:
    _require(
        spec.image_size >= 4 and spec.image_size % 4 == 0,
        f"{prefix}/image_size",
        "must be a positive multiple of 4",
    )
    _require(1 <= spec.n_shapes <= 3, f"{prefix}/n_shapes", "must be between 1 and 3")
    _one_of(spec.texture_a, TEXTURES, f"{prefix}/texture_a")
    _one_of(spec.texture_b, TEXTURES, f"{prefix}/texture_b")
    _require(
        spec.texture_a != spec.texture_b,
        f"{prefix}/texture_b",
        f"must differ from texture_a (`{spec.texture_a}`)",
    )
    _one_of(spec.background, BACKGROUNDS, f"{prefix}/background")
    _require(spec.noise_sigma >= 0, f"{prefix}/noise_sigma", "must be >= 0")
    _require(spec.n_train >= 1, f"{prefix}/n_train", "must be >= 1")
    _require(spec.n_test >= 0, f"{prefix}/n_test", "must be >= 0")


def validate_train_config(cfg: DictConfig) -> None:
    r"""Semantic checks of a merged training configuration, raising `ConfigError` at the first failure."""
    arch = cfg.arch
    _require(arch.channels >= 1, "/arch/channels", "must be >= 1")
    _require(arch.base_channels >= 1, "/arch/base_channels", "must be >= 1")
    _require(arch.n_blocks >= 0, "/arch/n_blocks", "must be >= 0")
    _require(
        arch.image_size >= 4 and arch.image_size % 4 == 0,
        "/arch/image_size",
        "must be a positive multiple of 4",
    )
    _one_of(arch.normalization, NORMALIZATIONS, "/arch/normalization")
    _one_of(arch.generator, GENERATOR_KINDS, "/arch/generator")
    _one_of(arch.gen_activation, SUPPORTED_ACTIVATION_MAP, "/arch/gen_activation")
    _one_of(arch.disc_activation, SUPPORTED_ACTIVATION_MAP, "/arch/disc_activation")
    _require(
        arch.disc_layers >= 1 and arch.image_size >= 2**arch.disc_layers,
        "/arch/disc_layers",
        f"needs 1 <= disc_layers and images of at least 2**disc_layers pixels (image_size {arch.image_size})",
    )

    task = cfg.task
    _one_of(task.kind, TASK_KINDS, "/task/kind")
    if task.kind == "synthetic":
        validate_task_spec(task.synthetic, prefix="/task/synthetic")
        _require(
            task.synthetic.image_size == arch.image_size,
            "/task/synthetic/image_size",
            f"must equal /arch/image_size ({arch.image_size})",
        )
    else:
        _require(task.data_dir is not None, "/task/data_dir", "is required for a 'png' task")
        _require(fs.exists(task.data_dir), "/task/data_dir", f"path does not exist: {task.data_dir}")
        if task.image_size is not None:
            _require(
                task.image_size == arch.image_size,
                "/task/image_size",
                f"must equal /arch/image_size ({arch.image_size})",
            )

    for name in ("lambda_adv", "lambda_tl", "lambda_rel1", "lambda_rel2"):
        value = cfg.weights[name]
        _require(
            math.isfinite(value) and value >= 0, f"/weights/{name}", f"must be finite and >= 0, got {value}"
        )
    _require(cfg.weights.lambda_tl > 0, "/weights/lambda_tl", "must be > 0 for training")
    for name in ("tl", "rel1", "rel2"):
        _one_of(cfg.norms[name], NORM_KINDS, f"/norms/{name}")

    _require(cfg.rule.window >= 2, "/rule/window", "must be >= 2")
    _require(cfg.rule.delta > 0, "/rule/delta", "must be > 0")
    _require(cfg.rule.patience >= 1, "/rule/patience", "must be >= 1")

    _require(cfg.optim.lr > 0, "/optim/lr", "must be > 0")
    _require(0 <= cfg.optim.beta1 < 1, "/optim/beta1", "must be in [0, 1)")
    _require(0 <= cfg.optim.beta2 < 1, "/optim/beta2", "must be in [0, 1)")
    _require(cfg.optim.eps > 0, "/optim/eps", "must be > 0")

    _one_of(cfg.precision, PRECISIONS, "/precision")
    _require(cfg.batch_size >= 1, "/batch_size", "must be >= 1")
    _require(cfg.total_steps >= 1, "/total_steps", "must be >= 1")
    _require(cfg.seed >= 0, "/seed", "must be >= 0")
    _one_of(cfg.rel1_pairing, PAIRING_POLICIES, "/rel1_pairing")
    _one_of(cfg.adversarial_mode, ADVERSARIAL_MODES, "/adversarial_mode")
    _require(cfg.d_steps_per_g >= 1, "/d_steps_per_g", "must be >= 1")
    _require(cfg.checkpoint_every >= 0, "/checkpoint_every", "must be >= 0")
    _require(cfg.eval_every >= 0, "/eval_every", "must be >= 0")
    _require(cfg.eval_batch_size >= 1, "/eval_batch_size", "must be >= 1")
    if cfg.task.kind == "synthetic":
        _require(
            cfg.batch_size <= cfg.task.synthetic.n_train,
            "/batch_size",
            f"larger than the training set ({cfg.task.synthetic.n_train} samples)",
        )


def train_config_from_dict(values: Mapping[str, Any]) -> TrainConfig:
    return _structured(TrainConfig, values, validate_train_config)


def task_spec_from_dict(values: Mapping[str, Any]) -> SyntheticTaskSpec:
    return _structured(SyntheticTaskSpec, values, validate_task_spec)


def load_train_config(path: PathLike) -> TrainConfig:
    """Read and validate a training configuration file."""
    return train_config_from_dict(read_json(path))


def load_task_spec(path: PathLike) -> SyntheticTaskSpec:
    """Read and validate a synthetic task description."""
    return task_spec_from_dict(read_json(path))
