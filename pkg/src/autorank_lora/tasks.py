"""Synthetic teacher-student regression tasks with a planted low-rank update.

Targets are ``(W0 + dW) @ x + noise`` where ``dW = P diag(s) Q`` has exactly
the rank and singular values requested, so the rank an adapter *should*
use is known.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from . import rng as _rng


def _orthonormal_columns(gen, n, r):
    if r == 0:
        return np.zeros((n, 0))
    q, upper = np.linalg.qr(gen.standard_normal((n, r)))
    # sign fix makes Q unique given the draw
    return q * np.sign(np.diag(upper))


def default_profile(r_star):
    """Linearly decaying spectrum ``r*, r*-1, ..., 1``."""
    return [float(r_star - i) for i in range(r_star)]


@dataclass(frozen=True, eq=False)
class SyntheticTask:
    base: np.ndarray
    true_update: np.ndarray
    true_rank: int
    spectrum_profile: tuple
    input_std: float = 1.0
    label_noise_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("base", "true_update"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def in_dim(self):
        return self.base.shape[1]

    @property
    def out_dim(self):
        return self.base.shape[0]

    @property
    def teacher(self):
        return self.base + self.true_update

    @property
    def layers(self):
        return (self,)

    def descriptor(self):
        return {
            "d": int(self.out_dim),
            "k": int(self.in_dim),
            "rank": int(self.true_rank),
            "profile": [float(s) for s in self.spectrum_profile],
            "label_noise_std": float(self.label_noise_std),
            "input_std": float(self.input_std),
            "seed": int(self.seed),
            "layers": 1,
        }


@dataclass(frozen=True, eq=False)
class NetworkTask:
    """Chain of synthetic layers; the teacher is the product of the
    per-layer teacher maps (layer 0 applied first)."""

    layers: tuple
    label_noise_std: float = 0.05
    input_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for j in range(len(self.layers) - 1):
            if self.layers[j].out_dim != self.layers[j + 1].in_dim:
                raise ShapeError(f"layers {j} and {j + 1} do not chain")

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    @property
    def teacher(self):
        m = self.layers[0].teacher
        for layer in self.layers[1:]:
            m = layer.teacher @ m
        return m

    def descriptor(self):
        first = self.layers[0]
        return {
            "d": int(first.out_dim),
            "k": int(first.in_dim),
            "rank": int(first.true_rank),
            "profile": [float(s) for s in first.spectrum_profile],
            "label_noise_std": float(self.label_noise_std),
            "input_std": float(self.input_std),
            "seed": int(self.seed),
            "layers": len(self.layers),
        }


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray


def _build_layer(gen, d, k, r_star, profile, label_noise_std, input_std, seed):
    base = gen.standard_normal((d, k)) / np.sqrt(k)
    P = _orthonormal_columns(gen, d, r_star)
    Q = _orthonormal_columns(gen, k, r_star).T
    update = (P * np.asarray(profile, dtype=np.float64)) @ Q
    return SyntheticTask(
        base=base,
        true_update=update,
        true_rank=r_star,
        spectrum_profile=tuple(float(s) for s in profile),
        input_std=float(input_std),
        label_noise_std=float(label_noise_std),
        seed=int(seed),
    )


def _check(d, k, r_star, profile):
    if d < 1 or k < 1:
        raise ShapeError(f"dimensions must be positive, got d={d}, k={k}")
    if r_star < 0 or r_star > min(d, k):
        raise ShapeError(f"rank {r_star} not in [0, min(d, k) = {min(d, k)}]")
    if profile is None:
        profile = default_profile(r_star)
    profile = [float(s) for s in profile]
    if len(profile) != r_star:
        raise DomainError(f"profile has {len(profile)} entries, expected {r_star}")
    if any(not s > 0 for s in profile):
        raise DomainError("profile entries must be positive")
    return profile


def make_task(d, k, r_star, spectrum_profile=None, label_noise_std=0.05, seed=0,
              input_std=1.0):
    """Build a single-layer task.

    ``base`` has i.i.d. N(0, 1/k) entries; the planted update is
    ``P diag(spectrum_profile) Q`` with random orthonormal ``P`` (d x r*) and
    ``Q`` (r* x k). Identical arguments give bit-identical tasks.
    """
    profile = _check(d, k, r_star, spectrum_profile)
    gen = _rng.stream(seed, _rng.TASK)
    return _build_layer(gen, d, k, r_star, profile, label_noise_std, input_std, seed)


def make_network_task(n_layers, d, k, r_star, spectrum_profile=None,
                      label_noise_std=0.05, seed=0, input_std=1.0):
    """Chain of ``n_layers`` planted layers: the first maps k -> d, the
    rest d -> d. Each layer draws from its own substream of ``seed``."""
    if n_layers < 1:
        raise DomainError("need at least one layer")
    layers = []
    for j in range(n_layers):
        k_j = k if j == 0 else d
        profile = _check(d, k_j, r_star, spectrum_profile)
        gen = _rng.substream(seed, _rng.TASK, j)
        layers.append(
            _build_layer(gen, d, k_j, r_star, profile, 0.0, input_std, seed)
        )
    return NetworkTask(
        layers=tuple(layers),
        label_noise_std=float(label_noise_std),
        input_std=float(input_std),
        seed=int(seed),
    )


def task_from_descriptor(desc):
    """Rebuild a task from the dict produced by ``descriptor()``."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    args = dict(
        d=int(desc["d"]),
        k=int(desc["k"]),
        r_star=int(desc["rank"]),
        spectrum_profile=desc.get("profile"),
        label_noise_std=float(desc.get("label_noise_std", 0.05)),
        seed=int(desc.get("seed", 0)),
        input_std=float(desc.get("input_std", 1.0)),
    )
    n_layers = int(desc.get("layers", 1))
    if n_layers == 1:
        return make_task(**args)
    return make_network_task(n_layers, **args)


def sample_batch(task, batch_size, rng, label_noise_std=None):
    """Draw ``batch_size`` fresh input/target pairs.

    Inputs are N(0, input_std^2); targets add N(0, label_noise_std^2) to
    the teacher output. Pass ``label_noise_std=0`` for clean targets.
    """
    if batch_size < 1:
        raise DomainError("batch_size must be at least 1")
    noise = task.label_noise_std if label_noise_std is None else label_noise_std
    inputs = rng.normal(0.0, task.input_std, size=(batch_size, task.in_dim))
    targets = inputs @ task.teacher.T
    if noise > 0:
        targets = targets + rng.normal(0.0, noise, size=targets.shape)
    return Batch(inputs=inputs, targets=targets)
