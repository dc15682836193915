"""Rank and recovery metrics, spectrum traces, and the hypersphere
concentration experiment."""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import rng as _rng
from .errors import DomainError, ShapeError

_RANK_TOL = 1e-10


def effective_rank(m, energy=0.99):
    """Smallest number of leading singular values holding ``energy`` of the
    total squared spectral energy.

    Singular values at or below ``1e-10`` times the largest are treated as
    zero, so ``effective_rank(m, 1.0)`` is the numerical rank. A zero matrix
    has effective rank 0.
    """
    if not 0.0 < energy <= 1.0:
        raise DomainError(f"energy must lie in (0, 1], got {energy!r}")
    s = np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    s = s[s > _RANK_TOL * s[0]]
    cum = np.cumsum(s * s)
    return int(np.searchsorted(cum, energy * cum[-1], side="left")) + 1


def numerical_rank(m):
    s = np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > _RANK_TOL * s[0]))


def recovery_error(learned, truth, eps=1e-12):
    """Relative Frobenius error ``||learned - truth|| / max(||truth||, eps)``."""
    learned = np.asarray(learned, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if learned.shape != truth.shape:
        raise ShapeError(f"shape mismatch: {learned.shape} vs {truth.shape}")
    return float(np.linalg.norm(learned - truth) / max(np.linalg.norm(truth), eps))


@dataclass
class SpectrumTrace:
    """Singular values of every restarted factor, one entry per restart."""

    entries: list

    @classmethod
    def from_reports(cls, reports):
        by_epoch = {}
        for report in reports:
            layers = by_epoch.setdefault(report.epoch, {})
            for rec in report.per_layer:
                layers[rec.layer] = np.asarray(rec.spectrum_before)
        return cls([(epoch, by_epoch[epoch]) for epoch in sorted(by_epoch)])

    def to_csv(self):
        """CSV text with columns ``epoch, layer, index, singular_value``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("epoch", "layer", "index", "singular_value"))
        for epoch, layers in self.entries:
            for name in sorted(layers):
                for i, s in enumerate(layers[name]):
                    w.writerow((epoch, name, i, repr(float(s))))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        by_epoch = {}
        for row in csv.DictReader(io.StringIO(text)):
            layers = by_epoch.setdefault(int(row["epoch"]), {})
            layers.setdefault(row["layer"], []).append(float(row["singular_value"]))
        return cls(
            [
                (e, {k: np.asarray(v) for k, v in by_epoch[e].items()})
                for e in sorted(by_epoch)
            ]
        )


@dataclass(frozen=True)
class SphereExperiment:
    dimension: int
    samples: int
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 1 or self.samples < 1 or self.trials < 1:
            raise DomainError("dimension, samples and trials must all be at least 1")


@dataclass
class SphereSummary:
    dimension: int
    samples: int
    ratios: np.ndarray

    @property
    def mean(self):
        return float(np.mean(self.ratios))

    @property
    def std(self):
        return float(np.std(self.ratios))

    @property
    def median(self):
        return float(np.median(self.ratios))

    @property
    def predicted_mean(self):
        return predicted_mean_ratio(self.dimension, self.samples)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "samples": self.samples,
            "trials": int(self.ratios.size),
            "mean": self.mean,
            "std": self.std,
            "median": self.median,
            "predicted_mean": self.predicted_mean,
        }


def chi_mean(dof):
    """Mean of the chi distribution, ``sqrt(2) Gamma((k+1)/2) / Gamma(k/2)``."""
    return math.sqrt(2.0) * math.exp(gammaln((dof + 1) / 2.0) - gammaln(dof / 2.0))


def predicted_mean_ratio(dimension, samples):
    """``sqrt(1 / (R * lam)) * E[chi_R]``, the Gaussian approximation of the
    mean ratio."""
    return math.sqrt(1.0 / (dimension * samples)) * chi_mean(dimension)


_CHUNK_ELEMENTS = 1 << 22


def sphere_ratio_experiment(exp):
    """Ratio ``||sum of lam random unit vectors|| / ||sum of lam copies of a
    fixed unit vector||`` in dimension R, once per trial.

    Unit vectors are normalized Gaussian draws. Trials are generated in
    chunks from a single stream, so results do not depend on the chunk size.
    """
    gen = _rng.stream(exp.seed, _rng.SPHERE)
    R, lam = exp.dimension, exp.samples
    per_chunk = max(1, _CHUNK_ELEMENTS // (R * lam))
    ratios = np.empty(exp.trials)
    done = 0
    while done < exp.trials:
        n = min(per_chunk, exp.trials - done)
        x = gen.standard_normal((n, lam, R))
        x /= np.linalg.norm(x, axis=2, keepdims=True)
        ratios[done:done + n] = np.linalg.norm(x.sum(axis=1), axis=1) / lam
        done += n
    return SphereSummary(dimension=R, samples=lam, ratios=ratios)


def sphere_grid(dimensions, samples, trials, seed=0):
    """Run the experiment on every ``(R, lam)`` pair; returns a dict keyed by
    the pair."""
    return {
        (R, lam): sphere_ratio_experiment(SphereExperiment(R, lam, trials, seed))
        for R in dimensions
        for lam in samples
    }


def grid_summary_json(grid):
    cells = [grid[key].to_dict() for key in sorted(grid)]
    return json.dumps({"cells": cells}, indent=2, sort_keys=True)
