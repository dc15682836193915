"""Pinned random streams.

Every generator in the package is ``numpy.random.Generator(PCG64(...))``
seeded from ``SeedSequence([seed, stream])``. PCG64 and SeedSequence are
specified bit-for-bit by numpy, so a ``(seed, stream)`` pair yields the same
draws on every platform. OS entropy is never consulted.

Named streams keep independent consumers from perturbing each other: e.g.
the RESTART noise draws never shift the minibatch order, so a run without
restarts reproduces the fixed-rank baseline exactly.
"""

import numpy as np

TASK = 0
INIT = 1
DATA = 2
RESTART = 3
EVAL = 4
FINAL_EVAL = 5
SPHERE = 6


def stream(seed, stream_id=0):
    """Return the generator for ``(seed, stream_id)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed), int(stream_id)])
    return np.random.Generator(np.random.PCG64(ss))


def substream(seed, stream_id, index):
    """Generator for item ``index`` (layer, trial, ...) of a named stream."""
    ss = np.random.SeedSequence([int(seed), int(stream_id), int(index)])
    return np.random.Generator(np.random.PCG64(ss))
