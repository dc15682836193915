"""SVD-based RESTART of adapter factors.

A RESTART decomposes a factor matrix ``M = U diag(d) V``, keeps the leading
singular directions that hold the bulk of the squared spectral energy, and
replaces everything else by i.i.d. Gaussian noise of matching variance::

    M' = U diag(d') V + G,   G ~ N(0, sigma^2),
    sigma = std(M - U diag(d') V)

The noise is added to the whole matrix, retained directions included.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError, ShapeError


@dataclass(frozen=True)
class SpectralFactors:
    """Thin SVD ``u @ diag(d) @ v`` with ``d`` sorted non-increasing."""

    u: np.ndarray
    d: np.ndarray
    v: np.ndarray

    def reconstruct(self, d=None):
        d = self.d if d is None else d
        return (self.u * d) @ self.v


@dataclass(frozen=True)
class SignalSplit:
    """Partition of singular-value indices ``0..size-1`` into a retained
    prefix (signal) and the discarded rest (noise)."""

    retained: int
    size: int
    threshold: float

    @property
    def signal(self):
        return tuple(range(self.retained))

    @property
    def noise(self):
        return tuple(range(self.retained, self.size))


@dataclass
class LayerRestart:
    """What a RESTART did to one factor matrix.

    ``retained_energy`` is the squared norm of the kept part
    (``U D' V``); ``replaced_energy`` is the squared norm of the residual that
    was swapped for noise, which lumps the noise and error components.
    """

    layer: str
    retained: int
    sigma: float
    spectrum_before: np.ndarray
    spectrum_after: np.ndarray
    retained_energy: float = 0.0
    replaced_energy: float = 0.0

    def to_dict(self):
        return {
            "layer": self.layer,
            "I": int(self.retained),
            "sigma": float(self.sigma),
            "retained_energy": float(self.retained_energy),
            "replaced_energy": float(self.replaced_energy),
            "spectrum_before": [float(s) for s in self.spectrum_before],
            "spectrum_after": [float(s) for s in self.spectrum_after],
        }


@dataclass
class RestartReport:
    """Record of one RESTART applied to one adapter (or a whole network when
    the union is taken globally)."""

    threshold: float
    alpha: float = float("nan")
    epoch: int = 0
    per_layer: list = field(default_factory=list)

    @property
    def retained(self):
        return max(layer.retained for layer in self.per_layer)

    def to_dict(self):
        return {
            "epoch": int(self.epoch),
            "p": float(self.threshold),
            "alpha": float(self.alpha),
            "I": int(self.retained),
            "layers": [layer.to_dict() for layer in self.per_layer],
        }

    def csv_rows(self):
        """One ``(epoch, layer, I, sigma, spectrum_json)`` row per layer.

        ``spectrum_json`` holds the pre- and post-restart singular values.
        """
        rows = []
        for layer in self.per_layer:
            spectra = {
                "before": [float(s) for s in layer.spectrum_before],
                "after": [float(s) for s in layer.spectrum_after],
            }
            rows.append(
                (
                    int(self.epoch),
                    layer.layer,
                    int(layer.retained),
                    repr(float(layer.sigma)),
                    json.dumps(spectra, separators=(",", ":")),
                )
            )
        return rows


RESTART_CSV_HEADER = ("epoch", "layer", "I", "sigma", "spectrum_json")


def svd(m):
    """Thin singular value decomposition.

    Raises
    ------
    NumericError
        If ``m`` has non-finite entries or LAPACK fails to converge.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    try:
        u, d, v = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    return SpectralFactors(u=u, d=d, v=v)


def signal_indices(d, p):
    """Split singular values by cumulative squared energy.

    With ``Sum_i = d[0]^2 + ... + d[i]^2`` and ``Sum`` the total, the signal
    set is ``{i : Sum_i < p * Sum}``; it is always a prefix. At least the top
    index is retained, so an all-zero spectrum or ``p = 0`` keeps ``{0}``.
    ``p = 1`` keeps every index (the strict rule alone would always drop the
    last one, whose cumulative sum equals ``Sum``).

    Examples
    --------
    >>> signal_indices([2.0, 1.0, 1.0], 0.7).signal
    (0,)
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"threshold p must lie in [0, 1], got {p!r}")
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ShapeError("singular values must be a non-empty vector")
    if p == 1.0:
        return SignalSplit(retained=d.size, size=d.size, threshold=1.0)
    cum = np.cumsum(d * d)
    count = int(np.count_nonzero(cum < cum[-1] * p))
    return SignalSplit(retained=max(count, 1), size=d.size, threshold=float(p))


def _truncate_and_refill(factors, keep, rng):
    kept = factors.d.copy()
    kept[keep:] = 0.0
    signal = factors.reconstruct(kept)
    residual = factors.reconstruct() - signal
    sigma = float(np.std(residual))
    out = signal + rng.normal(0.0, sigma, size=signal.shape)
    return out, sigma, signal, residual


def restart_layer(m, split, rng):
    """RESTART one matrix given a precomputed split of its spectrum.

    Returns
    -------
    out : ndarray
        ``U D' V + G`` with the same shape as ``m``.
    sigma : float
        Population standard deviation of ``m - U D' V``.
    """
    factors = svd(m)
    if split.size != factors.d.size:
        raise ShapeError(
            f"split covers {split.size} singular values, matrix has {factors.d.size}"
        )
    out, sigma, _, _ = _truncate_and_refill(factors, split.retained, rng)
    return out, sigma


def _restart_group(named_matrices, p, rng):
    """Shared union logic: one retained count for every matrix in the group."""
    factored = [(name, m, svd(m)) for name, m in named_matrices]
    keep = max(signal_indices(f.d, p).retained for _, _, f in factored)
    results = []
    for name, m, f in factored:
        layer_keep = min(keep, f.d.size)
        out, sigma, signal, residual = _truncate_and_refill(f, layer_keep, rng)
        after = np.linalg.svd(out, compute_uv=False)
        results.append(
            (
                out,
                LayerRestart(
                    layer=name,
                    retained=layer_keep,
                    sigma=sigma,
                    spectrum_before=f.d.copy(),
                    spectrum_after=after,
                    retained_energy=float(np.sum(signal * signal)),
                    replaced_energy=float(np.sum(residual * residual)),
                ),
            )
        )
    return results


def restart_module(adapter, p, rng, *, layer_id=0, epoch=0, alpha=float("nan")):
    """RESTART both factors of ``adapter`` in place.

    Each factor gets its own signal set; since the sets are prefixes, their
    union is the longer one, so both factors keep ``I = max(|S_up|, |S_down|)``
    directions. Each factor is refilled with noise at its own ``sigma``.
    """
    results = _restart_group(
        [(f"{layer_id}.up", adapter.up), (f"{layer_id}.down", adapter.down)], p, rng
    )
    (adapter.up, up_rec), (adapter.down, down_rec) = results
    return RestartReport(threshold=p, alpha=alpha, epoch=epoch, per_layer=[up_rec, down_rec])


def restart_network(network, p, rng, *, scope="pair", epoch=0, alpha=float("nan")):
    """RESTART every adapter in ``network``.

    ``scope="pair"`` unions signal sets within each adapter's factor pair and
    returns one report per adapter. ``scope="global"`` takes a single union
    over every factor in the network and returns one report.
    """
    if scope == "pair":
        return [
            restart_module(layer, p, rng, layer_id=j, epoch=epoch, alpha=alpha)
            for j, layer in enumerate(network)
        ]
    if scope != "global":
        raise DomainError(f"unknown union scope {scope!r}")
    named = []
    for j, layer in enumerate(network):
        named += [(f"{j}.up", layer.up), (f"{j}.down", layer.down)]
    results = _restart_group(named, p, rng)
    for j, layer in enumerate(network):
        layer.up = results[2 * j][0]
        layer.down = results[2 * j + 1][0]
    return [
        RestartReport(threshold=p, alpha=alpha, epoch=epoch, per_layer=[r for _, r in results])
    ]
