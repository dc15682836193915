"""
One RESTART, step by step
=========================

Build a matrix with a clear low-rank part plus small noise, pick the
signal directions by cumulative energy, then swap the rest for fresh
Gaussian noise of the same standard deviation.
"""

import numpy as np

from autorank_lora import init_adapter, restart_module, signal_indices, svd, threshold

rng = np.random.default_rng(0)

# a rank-3 matrix buried in small noise
u, _ = np.linalg.qr(rng.standard_normal((32, 3)))
v, _ = np.linalg.qr(rng.standard_normal((24, 3)))
m = (u * [6.0, 4.0, 2.0]) @ v.T + 0.05 * rng.standard_normal((32, 24))

factors = svd(m)
print("leading singular values:", np.round(factors.d[:6], 3))

# the energy cut p comes from the normalized loss l and the epoch exponent
for l, a in [(0.5, 1.0), (0.1, 1.5), (0.01, 2.0)]:
    p = threshold(l, a)
    split = signal_indices(factors.d, p)
    print(f"l={l:<5} alpha={a}  p={p:.4f}  keeps {split.retained} directions")

# %%
# On an adapter both factors are cut to the same count (the larger of the
# two signal sets), so the product keeps a consistent rank.

adapter = init_adapter(32, 24, 8, seed=1)
adapter.up[:] = rng.standard_normal(adapter.up.shape) * [5, 3, 1, .1, .1, .1, .1, .1]
report = restart_module(adapter, 0.9, rng, epoch=10, alpha=1.1)
for layer in report.per_layer:
    print(f"{layer.layer:7s} kept {layer.retained}  noise sigma {layer.sigma:.4f}")
print("union count:", report.retained)
