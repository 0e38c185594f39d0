from .schedule import Phase, PhaseState, StagnationRule, observe, active_terms
from .losses import (
    LossWeights,
    LossNorms,
    LossReport,
    ObjectiveOptions,
    cycle_loss,
    rel1_loss,
    rel2_loss,
    adversarial_losses,
    total_objective,
)
from .metrics import EvalReport, ssim, psnr, background_preservation, evaluate
from .train_options import TaskOptions, OptimOptions, TrainConfig, cyclegan_baseline
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from .run_log import MetricsLog
from .trainer import RunState, init_run_state, train_step, fit
from .verification import run_gradcheck
