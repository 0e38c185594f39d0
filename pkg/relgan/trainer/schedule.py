r"""
Phase machine of the contention schedule.

The relative term ReL₁ is active from the start. Once its windowed mean stops
improving for `patience` consecutive windows, the second relative term ReL₂ joins
the objective. The transition is monotone and happens at most once.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, Optional, Tuple

from relgan.errors import PhaseError


class Phase(Enum):
    TL_REL1 = 0
    TL_REL1_REL2 = 1


@dataclass
class StagnationRule:
    r"""
    Parameters:
        window: number of steps per window (W >= 2)
        delta: minimal relative improvement of the windowed mean (> 0)
        patience: consecutive stagnant windows triggering the transition (P >= 1)
    """

    window: int = 200
    delta: float = 0.01
    patience: int = 3

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"Stagnation window must be >= 2, provided {self.window}")
        if not self.delta > 0:
            raise ValueError(f"Stagnation delta must be > 0, provided {self.delta}")
        if self.patience < 1:
            raise ValueError(f"Stagnation patience must be >= 1, provided {self.patience}")


@dataclass(frozen=True)
class PhaseState:
    r"""
    Snapshot of the phase machine. Instances are immutable values; `observe`
    returns a new state.

    Parameters:
        phase: the current phase
        history: values of the current, incomplete window (at most W of them)
        previous_mean: mean of the last complete window, `None` before the first one
        windows_stagnant: consecutive complete windows whose improvement was below delta
        step: number of values observed
        transition_step: step at which the transition fired, if it did
    """

    phase: Phase = Phase.TL_REL1
    history: Tuple[float, ...] = field(default_factory=tuple)
    previous_mean: Optional[float] = None
    windows_stagnant: int = 0
    step: int = 0
    transition_step: Optional[int] = None

    @property
    def transitioned(self) -> bool:
        return self.phase is Phase.TL_REL1_REL2


def observe(state: PhaseState, rel1_value: float, rule: StagnationRule) -> PhaseState:
    r"""
    Append one ReL₁ value. At each window boundary, the relative improvement
    `r = (previous_mean - current_mean) / previous_mean` is computed, and taken as 0
    when the previous mean is exactly 0, so the test does not depend on the scale of
    the values. The stagnation counter increments when `r < delta` and resets
    otherwise. The first complete window only sets the baseline.
    """
    value = float(rel1_value)
    if math.isnan(value) or math.isinf(value):
        raise PhaseError(f"Cannot observe a non-finite value ({value}) at step {state.step + 1}")
    if value < 0:
        raise PhaseError(f"Observed values must be nonnegative, received {value} at step {state.step + 1}")

    history = state.history + (value,)
    step = state.step + 1
    if len(history) < rule.window:
        return replace(state, history=history, step=step)

    current_mean = math.fsum(history) / len(history)
    previous_mean = state.previous_mean
    windows_stagnant = state.windows_stagnant
    if previous_mean is not None:
        r = 0.0 if previous_mean == 0 else (previous_mean - current_mean) / previous_mean
        windows_stagnant = windows_stagnant + 1 if r < rule.delta else 0

    phase, transition_step = state.phase, state.transition_step
    if phase is Phase.TL_REL1 and windows_stagnant >= rule.patience:
        phase, transition_step = Phase.TL_REL1_REL2, step

    return PhaseState(
        phase=phase,
        history=(),
        previous_mean=current_mean,
        windows_stagnant=windows_stagnant,
        step=step,
        transition_step=transition_step,
    )


def active_terms(state: PhaseState, drop_rel1: bool = False) -> FrozenSet[str]:
    r"""
    Loss-term tags entering the generator objective in the state's phase:
    {adv, tl, rel1} before the transition, {adv, tl, rel1, rel2} after it.
    With `drop_rel1`, ReL₁ leaves the objective once ReL₂ joins (ablation).
    """
    if state.phase is Phase.TL_REL1:
        return frozenset({"adv", "tl", "rel1"})
    if drop_rel1:
        return frozenset({"adv", "tl", "rel2"})
    return frozenset({"adv", "tl", "rel1", "rel2"})
