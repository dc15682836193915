"""Low-rank adapter layers.

An adapter wraps a frozen base matrix ``W0`` (d x k) with a trainable factor
pair: ``up`` (d x R) and ``down`` (R x k). The layer computes

    y = W0 @ x + up @ (down @ x)

No ``alpha / r`` output scaling is applied.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from . import rng as _rng


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(eq=False)
class AdapterPair:
    """Frozen base matrix plus a trainable ``up @ down`` update.

    Parameters
    ----------
    base : ndarray, shape (d, k)
        Frozen weights. Stored as a read-only copy.
    up : ndarray, shape (d, R)
    down : ndarray, shape (R, k)
    max_rank : int
        Inner dimension ``R``.
    """

    base: np.ndarray
    up: np.ndarray
    down: np.ndarray
    max_rank: int

    def __post_init__(self):
        self.base = _frozen(self.base)
        self.up = np.array(self.up, dtype=np.float64, copy=True)
        self.down = np.array(self.down, dtype=np.float64, copy=True)
        d, k = self.base.shape
        R = self.max_rank
        if R < 1:
            raise ShapeError(f"max_rank must be positive, got {R}")
        if self.up.shape != (d, R) or self.down.shape != (R, k):
            raise ShapeError(
                f"factor shapes {self.up.shape} and {self.down.shape} do not "
                f"match base {self.base.shape} with rank {R}"
            )

    @property
    def shape(self):
        return self.base.shape

    def copy(self):
        return AdapterPair(self.base, self.up.copy(), self.down.copy(), self.max_rank)

    def to_dict(self):
        """Row-major JSON-ready dump: ``base``, ``up``, ``down``, ``max_rank``."""
        return {
            "max_rank": int(self.max_rank),
            "base": self.base.tolist(),
            "up": self.up.tolist(),
            "down": self.down.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            base=np.asarray(data["base"], dtype=np.float64),
            up=np.asarray(data["up"], dtype=np.float64),
            down=np.asarray(data["down"], dtype=np.float64),
            max_rank=int(data["max_rank"]),
        )


@dataclass(eq=False)
class AdapterNetwork:
    """Chain of adapter layers applied in order (layer 0 sees the input)."""

    layers: list = field(default_factory=list)

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ShapeError("an adapter network needs at least one layer")
        for j in range(len(self.layers) - 1):
            d_out = self.layers[j].shape[0]
            k_in = self.layers[j + 1].shape[1]
            if d_out != k_in:
                raise ShapeError(
                    f"layer {j} outputs {d_out} values but layer {j + 1} "
                    f"expects {k_in}"
                )

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, j):
        return self.layers[j]

    @property
    def in_dim(self):
        return self.layers[0].shape[1]

    @property
    def out_dim(self):
        return self.layers[-1].shape[0]

    def copy(self):
        return AdapterNetwork([layer.copy() for layer in self.layers])

    def to_dict(self):
        return {"layers": [layer.to_dict() for layer in self.layers]}

    @classmethod
    def from_dict(cls, data):
        return cls([AdapterPair.from_dict(layer) for layer in data["layers"]])


def init_adapter(d, k, R, seed, base=None):
    """Create an adapter whose update starts at exactly zero.

    ``down`` is drawn i.i.d. from N(0, (1/R)^2) and ``up`` is zero. ``base``
    defaults to the zero matrix; tasks supply their own.

    Raises
    ------
    ShapeError
        If ``R > min(d, k)`` or ``base`` is not d x k.
    """
    if min(d, k, R) < 1:
        raise ShapeError(f"dimensions must be positive, got d={d}, k={k}, R={R}")
    if R > min(d, k):
        raise ShapeError(f"rank {R} exceeds min(d, k) = {min(d, k)}")
    if base is None:
        base = np.zeros((d, k))
    elif np.shape(base) != (d, k):
        raise ShapeError(f"base has shape {np.shape(base)}, expected {(d, k)}")
    gen = seed if isinstance(seed, np.random.Generator) else _rng.stream(seed, _rng.INIT)
    down = gen.normal(0.0, 1.0 / R, size=(R, k))
    return AdapterPair(base=base, up=np.zeros((d, R)), down=down, max_rank=R)


def forward(adapter, x):
    """Evaluate ``base @ x + up @ (down @ x)``.

    ``x`` may be a single vector of length k or a (k, n) matrix of column
    inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    k = adapter.base.shape[1]
    if x.shape[0] != k or x.ndim > 2:
        raise ShapeError(f"input has shape {x.shape}, expected leading dimension {k}")
    return adapter.base @ x + adapter.up @ (adapter.down @ x)


def effective_update(adapter):
    """The materialized low-rank update ``up @ down`` (d x k)."""
    return adapter.up @ adapter.down


def network_forward(network, x):
    """Apply every layer of ``network`` in order."""
    for layer in network:
        x = forward(layer, x)
    return x


def as_network(adapter_or_network):
    if isinstance(adapter_or_network, AdapterNetwork):
        return adapter_or_network
    return AdapterNetwork([adapter_or_network])
