"""
Pole dictionaries and atomic codes
==================================

A pole p generates the atom 1, p, p^2, ... ; a complex pole contributes its
real and imaginary parts as two columns.  Any sequence produced by a few
poles is a linear combination of their atoms, and over a larger dictionary
its code is sparse.
"""

import numpy as np

from dynkeys import PoleSet, build_dictionary, decode, encode_lasso, init_pole_ring, min_norm_code

# a quarter-turn pole cycles through 1, i, -1, -i
d = build_dictionary(PoleSet([1.0], [np.pi / 2], include_constant_atom=False), 5)
print(np.round(d.matrix, 12))

# a sequence made from two hidden poles plus an offset
hidden = PoleSet([0.97, 1.01], [0.4, 1.3])
truth = build_dictionary(hidden, 30)
rng = np.random.default_rng(0)
y = truth.matrix @ rng.standard_normal((truth.num_atoms, 3))

# over a dictionary that contains the hidden poles among 40 decoys, the
# lasso puts nearly all of the code energy on the right atoms
decoys = init_pole_ring(40, seed=1)
both = PoleSet(np.r_[hidden.magnitudes, decoys.magnitudes], np.r_[hidden.phases, decoys.phases])
big = build_dictionary(both, 30)
code = encode_lasso(big, y, alpha=0.1, max_iter=5000)
energy = np.sum(code.matrix**2, axis=1)
print(f"share of code energy on the 5 true atoms: {energy[:5].sum() / energy.sum():.3f}")
print(f"relative residual {np.linalg.norm(y - decode(big, code)) / np.linalg.norm(y):.2e}")

# five frames (one per atom) determine the rest once the right poles are known
idx = [0, 7, 14, 21, 29]
filled = decode(truth, min_norm_code(truth, idx, y[idx]))
print("max error from 5 of 30 frames:", np.max(np.abs(filled - y)))
