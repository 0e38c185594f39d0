r"""
The training loop: alternating discriminator and generator updates of the
quartet, with the phase machine deciding which relative terms enter the
generator objective.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

import torch
from loguru import logger
from torch import Tensor
from tqdm.auto import tqdm

from relgan.autodiff import backward, zero_grad
from relgan.autodiff.precision import Precision, precision
from relgan.data.batcher import Batcher
from relgan.data.datasets import TranslationDataset, load_dataset_dir, synthetic_dataset
from relgan.errors import CheckpointError, NonFiniteLossError
from relgan.nn.optim import AdamState, adam_step, network_grads
from relgan.nn.quartet import DISCRIMINATOR_NAMES, GeneratorQuartet, build_quartet
from relgan.trainer.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from relgan.trainer.losses import LossReport, discriminator_loss, rel1_pairing_mode, total_objective
from relgan.trainer.metrics import DIRECTIONS, evaluate
from relgan.trainer.run_log import PHASE_TRANSITION, MetricsLog, load_loss_frame
from relgan.trainer.schedule import PhaseState, observe
from relgan.trainer.train_options import TrainConfig
from relgan.utils import fs
from relgan.utils.hashing import get_md5_hash
from relgan.utils.safe_run import SafeRun
from relgan.visualization.curves import plot_loss_curves

PathLike = Union[str, os.PathLike]

CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.jsonl"
EVAL_REPORT_FILE = "eval_report.json"
CHECKPOINT_DIR = "checkpoints"
GRID_DIR = "grids"
EVAL_DIR = "eval"
LAST_CHECKPOINT = "last.relg"


@dataclass
class RunState:
    r"""
    Everything a run carries from one step to the next. The batch order is a
    pure function of `(seed, step)`, so no generator state is stored.

    Parameters:
        quartet: the six networks
        optimizers: Adam moments of each owned network
        phase: the phase machine
        step: generator steps done
        seed: the run seed
    """

    quartet: GeneratorQuartet
    optimizers: Dict[str, AdamState] = field(default_factory=dict)
    phase: PhaseState = field(default_factory=PhaseState)
    step: int = 0
    seed: int = 0


def init_run_state(cfg: TrainConfig) -> RunState:
    """Fresh networks (in the configured precision), empty moments, initial phase."""
    with precision(cfg.precision):
        quartet = build_quartet(cfg.arch, tied=cfg.tied, seed=cfg.seed)
    optimizers = {name: AdamState() for name in quartet.owned_network_names()}
    return RunState(quartet=quartet, optimizers=optimizers, phase=PhaseState(), step=0, seed=cfg.seed)


def _set_requires_grad(nets, flag: bool) -> None:
    for net in nets:
        for p in net.parameters():
            p.requires_grad_(flag)


def _update(state: RunState, net_name: str, cfg: TrainConfig) -> None:
    params = state.quartet.named_network_parameters(net_name)
    adam_step(
        params,
        network_grads(params),
        state.optimizers[net_name],
        lr=cfg.optim.lr,
        beta1=cfg.optim.beta1,
        beta2=cfg.optim.beta2,
        eps=cfg.optim.eps,
    )


def _check_finite(term: str, value: Tensor) -> None:
    v = float(value.detach())
    if not math.isfinite(v):
        raise NonFiniteLossError(term, f"non-finite value {v}")


def discriminator_step(state: RunState, a: Tensor, b: Tensor, cfg: TrainConfig) -> None:
    """One update of D_A and D_B on the real batches against detached current fakes."""
    quartet = state.quartet
    with torch.no_grad():
        fake_b = quartet.g_ab(a)
        fake_a = quartet.g_ba(b)
    d_params = list(quartet.discriminator_parameters())
    zero_grad(d_params)
    d_loss_a = discriminator_loss(quartet.d_a, a, fake_a)
    d_loss_b = discriminator_loss(quartet.d_b, b, fake_b)
    _check_finite("adv_d_a", d_loss_a)
    _check_finite("adv_d_b", d_loss_b)
    backward(d_loss_a + d_loss_b)
    for name in DISCRIMINATOR_NAMES:
        _update(state, name, cfg)
    zero_grad(d_params)


def generator_step(state: RunState, a: Tensor, b: Tensor, cfg: TrainConfig) -> LossReport:
    r"""
    One update of the owned generators on `total_g`, the discriminators frozen.
    The report is evaluated with the discriminators of this step.
    """
    quartet = state.quartet
    g_params = list(quartet.generator_parameters())
    _set_requires_grad(quartet.discriminators(), False)
    try:
        zero_grad(g_params)
        report = total_objective(quartet, a, b, cfg.weights, state.phase, cfg.objective_options())
        report.check_finite()
        if report.total_g.requires_grad:
            backward(report.total_g)
            for name in quartet.owned_generator_names():
                _update(state, name, cfg)
        zero_grad(g_params)
    finally:
        _set_requires_grad(quartet.discriminators(), True)
    return report


def phase_signal(report: LossReport, cfg: TrainConfig) -> float:
    """The value the phase machine observes: ReL₁ when available, else the TL sum."""
    values = report.as_floats()
    if rel1_pairing_mode(cfg.paired, cfg.rel1_pairing) == "off":
        return values["tl_a"] + values["tl_b"]
    return values["rel1_a"] + values["rel1_b"]


def train_step(
    state: RunState, a_batch: Tensor, b_batch: Tensor, cfg: TrainConfig
) -> Tuple[RunState, LossReport]:
    r"""
    One step of the contention loop:

    1. `d_steps_per_g` discriminator updates against detached fakes
    2. one generator update on the objective gated by the current phase
    3. the phase machine observes ReL₁ (the TL sum when ReL₁ is unavailable)

    Networks and moments are updated in place; the returned state carries the
    new phase and step.

    Raises:
        NonFiniteLossError: a loss term is NaN or infinite, the term is named
    """
    dtype = Precision.parse(cfg.precision).dtype
    a, b = a_batch.to(dtype), b_batch.to(dtype)
    for _ in range(cfg.d_steps_per_g):
        discriminator_step(state, a, b, cfg)
    report = generator_step(state, a, b, cfg)
    phase = observe(state.phase, phase_signal(report, cfg), cfg.rule)
    return replace(state, phase=phase, step=state.step + 1), report


def load_task_data(cfg: TrainConfig) -> Tuple[TranslationDataset, Optional[TranslationDataset]]:
    """The train split, and the test split when one exists."""
    dtype = Precision.parse(cfg.precision).dtype
    task = cfg.task
    if task.kind == "synthetic":
        train = synthetic_dataset(task.synthetic, "train")
        test = synthetic_dataset(task.synthetic, "test") if task.synthetic.n_test > 0 else None
    else:
        image_size = task.image_size or cfg.arch.image_size
        train = load_dataset_dir(
            task.data_dir, "train", image_size=image_size, paired=True if cfg.paired else None
        )
        test = None
        if fs.exists(fs.join(task.data_dir, "testA")):
            test = load_dataset_dir(task.data_dir, "test", image_size=image_size)
    return train.to(dtype), (test.to(dtype) if test is not None else None)


def resolved_config(cfg: TrainConfig) -> Dict:
    """The configuration as written to disk, with its fingerprint."""
    values = cfg.to_dict()
    return {"config": values, "md5": get_md5_hash(values), "model": get_md5_hash(cfg.model_fingerprint())}


def check_resumable(checkpoint: Checkpoint, cfg: TrainConfig) -> None:
    saved = checkpoint.config
    expected = get_md5_hash(cfg.model_fingerprint())
    if saved.get("model") != expected:
        raise CheckpointError(
            f"Checkpoint {checkpoint.path} was written for another architecture/tied/precision setting "
            f"than the configuration resuming from it"
        )
    if checkpoint.step > cfg.total_steps:
        raise CheckpointError(f"Checkpoint step {checkpoint.step} is past `total_steps` ({cfg.total_steps})")


def configure_torch(cfg: TrainConfig) -> None:
    torch.manual_seed(cfg.seed)
    if cfg.deterministic:
        try:
            torch.use_deterministic_algorithms(True, warn_only=True)
        except (RuntimeError, TypeError) as e:
            logger.warning(f"Deterministic algorithms unavailable: {e}")


def evaluate_all(
    state: RunState,
    test_set: TranslationDataset,
    out_dir: PathLike,
    cfg: TrainConfig,
    with_grids: bool = True,
) -> Dict[str, Dict]:
    reports = {}
    for direction in DIRECTIONS:
        grid_path = fs.join(out_dir, f"{direction}.png") if with_grids else None
        report = evaluate(
            state.quartet, test_set, direction, grid_path=grid_path, batch_size=cfg.eval_batch_size
        )
        reports[direction] = report.to_dict()
        logger.info(
            f"Eval {direction} at step {state.step}: bps={report.bps:.4f}, fgs={report.fgs:.4f}, "
            f"ssim={report.ssim:.4f}, psnr={report.psnr_db:.2f}dB"
        )
    return reports


def fit(cfg: TrainConfig, out_dir: PathLike, resume: Optional[PathLike] = None) -> RunState:
    r"""
    Run `cfg.total_steps` training steps and write the run directory:

    - `config.json`: the resolved configuration and its fingerprints
    - `metrics.jsonl`: one line per step, plus phase-transition events
    - `checkpoints/`: `step_XXXXX.relg` every `checkpoint_every` steps, and `last.relg`
    - `eval/`: periodic evaluation reports, `eval_report.json` the final one
    - `grids/`: final sample grids of both directions, and the loss curves

    Parameters:
        cfg: the validated configuration
        out_dir: the run directory
        resume: checkpoint to continue from. The metrics log is cut back to
            the checkpoint's step, and the continuation is the same as an
            uninterrupted run.
    """
    out_dir = str(out_dir)
    fs.mkdir(out_dir)
    fs.mkdir(fs.join(out_dir, CHECKPOINT_DIR))
    configure_torch(cfg)

    train_set, test_set = load_task_data(cfg)
    batcher = Batcher(train_set, cfg.batch_size, cfg.seed, cfg.paired)
    if not cfg.paired and rel1_pairing_mode(cfg.paired, cfg.rel1_pairing) == "off":
        logger.warning(
            "ReL₁ is unavailable on unpaired batches with `rel1_pairing='off'`; "
            "the phase machine observes TL"
        )

    config = resolved_config(cfg)
    fs.write_text(fs.join(out_dir, CONFIG_FILE), json.dumps(config, indent=2, sort_keys=True))
    log = MetricsLog(fs.join(out_dir, METRICS_FILE))

    state = init_run_state(cfg)
    if resume is not None:
        checkpoint = load_checkpoint(resume)
        check_resumable(checkpoint, cfg)
        state = checkpoint.restore(state)
        kept = log.truncate(state.step)
        logger.info(f"Resuming from step {state.step} ({kept} log lines kept): {resume}")
    else:
        log.truncate(0)

    logger.info(f"Training for {cfg.total_steps} steps in {out_dir} (config md5 {config['md5']})")
    for _ in tqdm(range(state.step, cfg.total_steps), desc="train", disable=not cfg.progress):
        batch = batcher.at_step(state.step)
        was_transitioned = state.phase.transitioned
        state, report = train_step(state, batch.a, batch.b, cfg)
        log.write_step(state.step, report)
        if state.phase.transitioned and not was_transitioned:
            log.write_event(PHASE_TRANSITION, state.step)
            logger.info(f"Phase transition at step {state.step}: ReL₂ joins the objective")

        if cfg.checkpoint_every > 0 and state.step % cfg.checkpoint_every == 0:
            save_checkpoint(state, config, fs.join(out_dir, CHECKPOINT_DIR, f"step_{state.step:05d}.relg"))
        if cfg.eval_every > 0 and test_set is not None and state.step % cfg.eval_every == 0:
            reports = evaluate_all(state, test_set, fs.join(out_dir, EVAL_DIR), cfg, with_grids=False)
            fs.write_text(
                fs.join(out_dir, EVAL_DIR, f"step_{state.step:05d}.json"), json.dumps(reports, indent=2)
            )

    save_checkpoint(state, config, fs.join(out_dir, CHECKPOINT_DIR, LAST_CHECKPOINT))
    if test_set is not None:
        reports = evaluate_all(state, test_set, fs.join(out_dir, GRID_DIR), cfg)
        fs.write_text(fs.join(out_dir, EVAL_REPORT_FILE), json.dumps(reports, indent=2))
    else:
        logger.warning("No test split, skipping the final evaluation")

    with SafeRun(name="Loss curves", raise_error=False):
        frame = load_loss_frame(fs.join(out_dir, METRICS_FILE))
        plot_loss_curves({"run": frame}, fs.join(out_dir, GRID_DIR, "loss_curves.png"))
    return state
