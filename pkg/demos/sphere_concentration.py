"""
Sums of random unit vectors
===========================

Draw lam points uniformly on the unit sphere in R dimensions and look at
``||sum|| / lam``. Its mean follows a scaled chi distribution, so it shrinks
like ``1/sqrt(lam)``; the R dependence is weak because the second moment
``E||sum||^2 = lam`` does not involve R at all.
"""

import numpy as np

from autorank_lora import SphereExperiment, sphere_ratio_experiment
from autorank_lora.analysis import predicted_mean_ratio

dims = (4, 16, 64)
lams = (16, 64, 256)

print("median ratio (rows R, columns lam)")
print("       " + "".join(f"{lam:>10d}" for lam in lams))
for R in dims:
    row = []
    for lam in lams:
        s = sphere_ratio_experiment(SphereExperiment(R, lam, 2000, seed=0))
        row.append(s.median)
    print(f"R={R:<4d} " + "".join(f"{x:10.4f}" for x in row))

# %%
# Against the closed form for the mean

s = sphere_ratio_experiment(SphereExperiment(16, 64, 2000, seed=0))
print(f"\nR=16 lam=64  mean {s.mean:.5f}  predicted {predicted_mean_ratio(16, 64):.5f}")
print(f"E[ratio^2] = {np.mean(s.ratios ** 2):.5f}  vs 1/lam = {1 / 64:.5f}")
