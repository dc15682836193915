"""Loss-driven threshold schedule.

The retained-energy threshold is ``p = 1 - l ** alpha`` where ``l`` is the
averaged training loss since the previous RESTART, normalized into (0, 1),
and ``alpha = epoch / total_epochs + 1`` grows from 1 to 2 over training.
"""

import math
from dataclasses import dataclass, field

from .errors import DomainError, StateError

LOSS_FLOOR = 1e-6
LOSS_CEILING = 1.0 - 1e-6


@dataclass
class ScheduleState:
    """Loss window and normalization constants for the threshold schedule.

    ``reference_loss`` is set from the first epoch's mean loss; the window is
    the list of epoch losses since the last RESTART.
    """

    total_epochs: int
    epoch: int = 0
    window_losses: list = field(default_factory=list)
    loss_floor: float = LOSS_FLOOR
    loss_ceiling: float = LOSS_CEILING
    reference_loss: float = None

    def __post_init__(self):
        if self.total_epochs < 1:
            raise DomainError("total_epochs must be at least 1")
        if not 0 < self.loss_floor < self.loss_ceiling < 1:
            raise DomainError("need 0 < loss_floor < loss_ceiling < 1")

    def record(self, loss):
        """Append one epoch's mean loss and advance the epoch counter."""
        if not math.isfinite(loss) or loss < 0:
            raise DomainError(f"epoch loss must be finite and non-negative, got {loss!r}")
        if self.epoch >= self.total_epochs:
            raise StateError("all epochs already recorded")
        self.epoch += 1
        if self.reference_loss is None:
            self.reference_loss = float(loss)
        self.window_losses.append(float(loss))

    def flush(self):
        """Empty the window (done at every RESTART and nowhere else)."""
        self.window_losses = []


def alpha(epoch, total_epochs):
    """Separation strength ``epoch / total_epochs + 1``, in [1, 2]."""
    if total_epochs < 1:
        raise DomainError("total_epochs must be at least 1")
    if not 0 <= epoch <= total_epochs:
        raise DomainError(f"epoch {epoch} outside [0, {total_epochs}]")
    return epoch / total_epochs + 1.0


def normalized_loss(state):
    """Window mean over the reference loss, clamped into the open unit
    interval."""
    if not state.window_losses:
        raise StateError("loss window is empty")
    ref = state.reference_loss
    if ref is None or not ref > 0:
        raise StateError(f"reference loss must be positive, got {ref!r}")
    mean = sum(state.window_losses) / len(state.window_losses)
    return min(max(mean / ref, state.loss_floor), state.loss_ceiling)


def threshold(l, alpha):
    """Energy fraction to retain, ``1 - l ** alpha``."""
    if not 0.0 < l < 1.0:
        raise DomainError(f"normalized loss must lie in (0, 1), got {l!r}")
    if not alpha >= 1.0:
        raise DomainError(f"alpha must be at least 1, got {alpha!r}")
    return 1.0 - l**alpha
