"""Adapter training with periodic RESTART, and the fixed-rank baseline.

The student is a chain of adapter layers ``h_{j+1} = W0_j h_j + B_j A_j h_j``
trained on the per-entry mean squared error against the task targets. For a
batch stored row-wise (``H_j`` is n x k_j) and ``G = dL/dH_{j+1}``::

    Z_j   = H_j A_j^T
    dL/dB_j = G^T Z_j
    dL/dA_j = (G B_j)^T H_j
    dL/dH_j = G W0_j + (G B_j) A_j

with ``G = 2 / (n * d_out) * (H_L - Y)`` at the output. Base matrices are
read-only and never updated.
"""

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .adapter import AdapterNetwork, as_network, init_adapter, network_forward
from .errors import DomainError, TrainingDiverged
from .schedule import LOSS_CEILING, LOSS_FLOOR, ScheduleState, alpha, normalized_loss, threshold
from .spectral import restart_network
from .tasks import sample_batch

MODES = ("ac_lora", "fixed_rank_baseline")
OPTIMIZERS = ("sgd", "adam")
UNION_SCOPES = ("pair", "global")


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``dataset_size`` fixes a finite training set drawn once per run and
    reshuffled every epoch; 0 draws fresh batches every step instead.
    """

    total_epochs: int = 100
    restart_interval: int = 10
    batches_per_epoch: int = 8
    batch_size: int = 32
    dataset_size: int = 256
    learning_rate: float = 2.0
    optimizer: str = "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_rank: int = 16
    union_scope: str = "pair"
    mode: str = "ac_lora"
    seed: int = 0
    eval_samples: int = 256
    final_eval_samples: int = 4096
    loss_floor: float = LOSS_FLOOR
    loss_ceiling: float = LOSS_CEILING

    def validate(self):
        if self.total_epochs < 1:
            raise DomainError("total_epochs must be at least 1")
        if self.restart_interval < 1:
            raise DomainError("restart_interval must be at least 1")
        if self.batches_per_epoch < 1 or self.batch_size < 1:
            raise DomainError("batches_per_epoch and batch_size must be at least 1")
        if self.dataset_size < 0:
            raise DomainError("dataset_size must be non-negative")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.max_rank < 1:
            raise DomainError("max_rank must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"optimizer must be one of {OPTIMIZERS}")
        if self.union_scope not in UNION_SCOPES:
            raise DomainError(f"union_scope must be one of {UNION_SCOPES}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        if self.eval_samples < 1 or self.final_eval_samples < 1:
            raise DomainError("evaluation sample counts must be at least 1")
        if not 0 < self.loss_floor < self.loss_ceiling < 1:
            raise DomainError("need 0 < loss_floor < loss_ceiling < 1")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    eval_loss: float
    p: float = float("nan")
    alpha: float = float("nan")
    retained: tuple = ()


@dataclass
class TrainRecord:
    epoch_losses: list
    eval_losses: list
    reports: list
    adapters: AdapterNetwork
    final_eval: float
    reference_loss: float
    epochs: list = field(default_factory=list)
    window_flush_epochs: list = field(default_factory=list)
    duration: float = 0.0

    @property
    def restart_epochs(self):
        return sorted({r.epoch for r in self.reports})

    @property
    def final_retained(self):
        """Retained count per adapter after the last restart (R if none)."""
        return self.epochs[-1].retained if self.epochs else ()


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, key, param, grad):
        param -= self.lr * grad

    def reset(self, key):
        pass


class _Adam:
    def __init__(self, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = {}

    def step(self, key, param, grad):
        m, v, t = self.state.get(key, (np.zeros_like(grad), np.zeros_like(grad), 0))
        t += 1
        m = self.beta1 * m + (1 - self.beta1) * grad
        v = self.beta2 * v + (1 - self.beta2) * grad * grad
        self.state[key] = (m, v, t)
        m_hat = m / (1 - self.beta1**t)
        v_hat = v / (1 - self.beta2**t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def reset(self, key):
        self.state.pop(key, None)


def _make_optimizer(config):
    if config.optimizer == "adam":
        return _Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    return _Sgd(config.learning_rate)


def loss_and_grads(network, inputs, targets):
    """Per-entry MSE of ``network`` on a row-wise batch and its gradients.

    Returns ``(loss, grads)`` with ``grads[j] = (dL/d up_j, dL/d down_j)``.
    """
    hidden = [inputs]
    codes = []
    h = inputs
    for layer in network:
        z = h @ layer.down.T
        h = h @ layer.base.T + z @ layer.up.T
        codes.append(z)
        hidden.append(h)
    residual = h - targets
    n, d_out = residual.shape
    loss = float(np.mean(residual * residual))
    g = (2.0 / (n * d_out)) * residual
    grads = [None] * len(network)
    for j in range(len(network) - 1, -1, -1):
        layer = network[j]
        gb = g @ layer.up
        grads[j] = (g.T @ codes[j], gb.T @ hidden[j])
        if j:
            g = g @ layer.base + gb @ layer.down
    return loss, grads


def init_network(task, max_rank, seed):
    """One zero-update adapter per task layer, each over the task's base."""
    layers = []
    for j, layer_task in enumerate(task.layers):
        gen = _rng.substream(seed, _rng.INIT, j)
        d, k = layer_task.base.shape
        layers.append(init_adapter(d, k, max_rank, gen, base=layer_task.base))
    return AdapterNetwork(layers)


def evaluate(adapter_or_network, task, n_samples, rng):
    """Held-out MSE on fresh noiseless samples (label noise forced to 0)."""
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    network = as_network(adapter_or_network)
    batch = sample_batch(task, n_samples, rng, label_noise_std=0.0)
    pred = network_forward(network, batch.inputs.T).T
    err = pred - batch.targets
    return float(np.mean(err * err))


def _batches(task, config, data_rng, dataset):
    """Yield the minibatches of one epoch."""
    if dataset is None:
        for _ in range(config.batches_per_epoch):
            b = sample_batch(task, config.batch_size, data_rng)
            yield b.inputs, b.targets
        return
    X, Y = dataset.inputs, dataset.targets
    n_train = X.shape[0]
    need = config.batches_per_epoch * config.batch_size
    order = data_rng.permutation(n_train)
    while order.size < need:
        order = np.concatenate([order, data_rng.permutation(n_train)])
    for b in range(config.batches_per_epoch):
        idx = order[b * config.batch_size:(b + 1) * config.batch_size]
        yield X[idx], Y[idx]


def train(task, config, *, log=None):
    """Train adapters on ``task``; RESTART every ``restart_interval`` epochs.

    Epochs are numbered from 1. In ``ac_lora`` mode a RESTART fires after
    every epoch divisible by ``restart_interval`` except the last one. The
    threshold uses the mean epoch loss since the previous RESTART divided by
    the first epoch's mean loss.

    Raises
    ------
    TrainingDiverged
        If a minibatch loss becomes non-finite.
    """
    config.validate()
    started = time.perf_counter()
    seed = config.seed
    network = init_network(task, config.max_rank, seed)
    data_rng = _rng.stream(seed, _rng.DATA)
    restart_rng = _rng.stream(seed, _rng.RESTART)
    eval_rng = _rng.stream(seed, _rng.EVAL)
    dataset = None
    if config.dataset_size:
        dataset = sample_batch(task, config.dataset_size, data_rng)
    optimizer = _make_optimizer(config)
    schedule = ScheduleState(
        total_epochs=config.total_epochs,
        loss_floor=config.loss_floor,
        loss_ceiling=config.loss_ceiling,
    )

    epoch_losses, eval_losses, reports, rows, flushes = [], [], [], [], []
    retained = tuple(config.max_rank for _ in network)
    last_finite = float("nan")
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.total_epochs + 1):
            batch_losses = []
            for inputs, targets in _batches(task, config, data_rng, dataset):
                loss, grads = loss_and_grads(network, inputs, targets)
                if not math.isfinite(loss):
                    raise TrainingDiverged(epoch, last_finite)
                last_finite = loss
                batch_losses.append(loss)
                for j, (layer, (g_up, g_down)) in enumerate(zip(network, grads)):
                    optimizer.step((j, "up"), layer.up, g_up)
                    optimizer.step((j, "down"), layer.down, g_down)
            epoch_loss = float(np.mean(batch_losses))
            if not math.isfinite(epoch_loss):
                raise TrainingDiverged(epoch, last_finite)
            schedule.record(epoch_loss)
            epoch_losses.append(epoch_loss)

            row = EpochRow(epoch=epoch, train_loss=epoch_loss, eval_loss=float("nan"))
            fire = (
                config.mode == "ac_lora"
                and epoch % config.restart_interval == 0
                and epoch < config.total_epochs
            )
            if fire:
                a = alpha(epoch, config.total_epochs)
                p = threshold(normalized_loss(schedule), a)
                new = restart_network(
                    network, p, restart_rng, scope=config.union_scope, epoch=epoch, alpha=a
                )
                reports.extend(new)
                for j in range(len(network)):
                    optimizer.reset((j, "up"))
                    optimizer.reset((j, "down"))
                if config.union_scope == "pair":
                    retained = tuple(r.retained for r in new)
                else:
                    retained = tuple(new[0].retained for _ in network)
                schedule.flush()
                flushes.append(epoch)
                row.p, row.alpha = p, a
                if log is not None:
                    log(f"epoch {epoch}: p={p:.6f} alpha={a:.3f} I={list(retained)}")
            row.retained = retained
            row.eval_loss = evaluate(network, task, config.eval_samples, eval_rng)
            eval_losses.append(row.eval_loss)
            rows.append(row)

    final_eval = evaluate(
        network, task, config.final_eval_samples, _rng.stream(seed, _rng.FINAL_EVAL)
    )
    return TrainRecord(
        epoch_losses=epoch_losses,
        eval_losses=eval_losses,
        reports=reports,
        adapters=network,
        final_eval=final_eval,
        reference_loss=schedule.reference_loss,
        epochs=rows,
        window_flush_epochs=flushes,
        duration=time.perf_counter() - started,
    )
