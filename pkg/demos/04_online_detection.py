"""
Online key-frame detection
==========================

After a batch selection on the first frames, each new frame is predicted
from the current key frames with the dictionary extended by one row.  Frames
the key frames cannot predict are admitted as new key frames.
"""

import numpy as np

from dynkeys import PoleSet, build_dictionary, init_online, step
from dynkeys.bench import bench_online, online_config, pinned_online
from dynkeys.synth import random_poles

rng = np.random.default_rng(0)
before = random_poles(rng, 2)
after = random_poles(rng, 2, include_constant_atom=False)
poles = PoleSet(np.r_[before.magnitudes, after.magnitudes], np.r_[before.phases, after.phases])
d = build_dictionary(poles, 40)

# the dynamics switch at frame 25
y = np.vstack([
    build_dictionary(before, 25).matrix @ rng.standard_normal((5, 6)),
    build_dictionary(after, 15).matrix @ rng.standard_normal((4, 6)),
])
state = init_online(d, y[:20], online_config(), tau=0.15)
print("initial key frames:", state.selected)
for row in y[20:]:
    state, admitted = step(state, row)
    rec = state.history[-1]
    print(f"frame {rec['frame']:2d}  residual {rec['residual']:.2e}  {'admit' if admitted else ''}")

# online against batch on the pinned corpus, sweeping the initial block
dicts, corpus = pinned_online()
rep = bench_online(corpus, dicts, online_config(), sweep=[5, 10, 20, 30])
for p in rep["curve"]:
    print(p["t_b"], p["batch_count"], p["online_count"], p["count_delta"])
print("Spearman of the count delta against T_b:", rep["spearman_count_delta"])
