"""
Filling in poses between key frames
===================================

Given skeletons on the key frames only, the full sequence is the
minimum-norm combination of dictionary atoms that passes through them.  The
pipeline selects key frames from features, asks a pose source for those
frames only and interpolates the rest, window by window.
"""

import numpy as np

from dynkeys import SynthSpec, build_dictionary, eval_pck, init_pole_ring, interpolate, pipeline, synth_corpus
from dynkeys.skeleton import SkeletonSequence

seq = synth_corpus(SynthSpec(num_seqs=1, num_frames=40, num_joints=5, pole_count=3), seed=2)[0]
truth = build_dictionary(seq.poles, 40)

# with the generating poles, seven frames carry the whole sequence
idx = np.array([0, 6, 13, 19, 26, 33, 39])
h = interpolate(truth, idx, seq.skeleton.coords[idx])
print("max pixel error:", np.max(np.abs(h - seq.skeleton.coords)))

# the pipeline with a generic pole ring (a much weaker pose model than the
# generating poles, so PCK is well below 100), asking a pose "estimator" only for key frames
ring = build_dictionary(init_pole_ring(80, ring=(0.95, 1.05), seed=0), 40)
asked = []


def estimator(frames):
    asked.extend(frames)
    return seq.skeleton.coords[frames]


res = pipeline(ring, ring, seq.y, estimator)
pred = SkeletonSequence(res.skeletons.coords, seq.skeleton.visibility, seq.skeleton.bbox)
print(f"{len(asked)} poses estimated for 40 frames, PCK {eval_pck(pred, seq.skeleton).mean:.1f}")
