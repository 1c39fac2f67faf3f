"""
Learning poles from data
========================

Training alternates between lasso codes for the current poles and a
gradient step on the pole magnitudes and phases with the codes fixed.
"""

import numpy as np

from dynkeys import PoleSet, build_dictionary, evaluate_dictionary, init_pole_ring, train_dictionary
from dynkeys.synth import random_poles

rng = np.random.default_rng(3)
hidden = random_poles(rng, 2)
d = build_dictionary(hidden, 20).matrix
seqs = [d @ rng.standard_normal((d.shape[1], 4)) for _ in range(10)]
train, heldout = seqs[:5], seqs[5:]

init = init_pole_ring(8, seed=3)
poles, trace = train_dictionary(init, train, alpha=0.1, epochs=30)
print("training loss:", np.round(trace[::5], 3))
print(f"held-out loss {evaluate_dictionary(init, heldout):.3f} -> {evaluate_dictionary(poles, heldout):.3f}")

# one hidden pole, one pole started next to it
m, th = 0.97, 1.2
y = build_dictionary(PoleSet([m], [th], include_constant_atom=False), 20).matrix @ rng.standard_normal((2, 3))
start = PoleSet([m + 0.04], [th - 0.04], include_constant_atom=False)
learned, _ = train_dictionary(start, [y], epochs=100)
print("hidden", m * np.exp(1j * th), "learned", learned.complex_poles()[0])
