"""
Selecting key frames
====================

The selector relaxes the binary choice of frames to s = sigmoid(alpha x) and
runs gradient descent on a loss that trades the recovery error of the
sequence from the chosen rows against the number of rows.  Alpha grows
during the run so that s ends close to 0/1.
"""

import math

import numpy as np

from dynkeys import bench
from dynkeys.selection import SelectorConfig, baseline_select, brute_force_select, recovery, select_keyframes

d, corpus = bench.pinned_table2()
cfg = SelectorConfig()
seq = corpus[30]  # a sequence whose dynamics change half way
res = select_keyframes(d, seq.y, cfg)
print("selected frames:", res.indices, "of", seq.y.shape[0])
print("indicator:", np.round(res.indicator.values, 3))

# compare against uniform spacing and exhaustive search at the same count
r = res.count
uni = baseline_select("uniform", d, seq.y, r)
best, val = brute_force_select(d, seq.y, r, rho=res.rho)
print(f"recovery: selected {res.recovery:.4f}, uniform {recovery(d, seq.y, uni, res.rho):.4f}, "
      f"brute force {val:.4f} over {math.comb(8, r)} subsets")

# a larger penalty keeps fewer frames
for lam in (0.05, 0.8, 3.0):
    print(lam, select_keyframes(d, seq.y, SelectorConfig(lam=lam)).indices)
