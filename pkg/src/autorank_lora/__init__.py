"""Automatic rank search for low-rank adapters.

Periodically decomposes each adapter factor by SVD, keeps the leading
directions that carry a loss-dependent fraction of the spectral energy and
replaces the rest by variance-matched Gaussian noise. Synthetic
teacher-student tasks with a planted update of known rank make the
behaviour measurable.
"""

from .adapter import (
    AdapterNetwork,
    AdapterPair,
    effective_update,
    forward,
    init_adapter,
    network_forward,
)
from .analysis import (
    SphereExperiment,
    SpectrumTrace,
    effective_rank,
    recovery_error,
    sphere_ratio_experiment,
)
from .errors import (
    ConfigError,
    DomainError,
    NumericError,
    ShapeError,
    StateError,
    TrainingDiverged,
)
from .schedule import ScheduleState, alpha, normalized_loss, threshold
from .spectral import (
    RestartReport,
    SignalSplit,
    SpectralFactors,
    restart_layer,
    restart_module,
    restart_network,
    signal_indices,
    svd,
)
from .tasks import Batch, NetworkTask, SyntheticTask, make_network_task, make_task, sample_batch
from .trainer import TrainConfig, TrainRecord, evaluate, train

__version__ = "0.1.0"
