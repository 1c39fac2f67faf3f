"""Seeded synthetic corpora of sequences generated by a few poles.

Each sequence is ``Y = D_true C_true (+ noise)`` where ``D_true`` is the
dictionary of a handful of random poles (plus the constant atom) and
``C_true`` is dense over those atoms, hence sparse over any larger
dictionary containing them.  With a change point the second part of the
sequence restarts from a different pole set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import COMPLEX, PoleSet, build_dictionary
from .skeleton import SkeletonSequence, bbox_from_coords

__all__ = ["SynthSpec", "SynthSequence", "synth_corpus", "random_poles"]


@dataclass
class SynthSpec:
    """Corpus description.

    Exactly one of ``num_features`` (feature corpus, ``M`` columns) and
    ``num_joints`` (skeleton corpus, ``2J`` columns in pixels) is used;
    ``num_joints`` wins when both are set.  Skeleton coordinates are
    ``pixel_center + pixel_scale * D C``; the center is dropped when there is
    no constant atom to carry it.
    """

    num_seqs: int = 10
    num_frames: int = 40
    num_features: int = 8
    num_joints: int = None
    pole_count: int = 2
    noise_sigma: float = 0.0
    changepoint: int = None
    ring: tuple = (0.9, 1.05)
    include_constant_atom: bool = True
    pixel_scale: float = 20.0
    pixel_center: float = 200.0

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, doc):
        names = cls.__dataclass_fields__
        kw = {k: v for k, v in doc.items() if k in names}
        if "ring" in kw:
            kw["ring"] = tuple(kw["ring"])
        return cls(**kw)


@dataclass
class SynthSequence:
    y: np.ndarray
    clean: np.ndarray
    poles: PoleSet
    code: np.ndarray
    changepoint: int = None
    poles_after: PoleSet = None
    code_after: np.ndarray = None
    skeleton: SkeletonSequence = None
    meta: dict = field(default_factory=dict)

    @property
    def nonstationary(self):
        return self.changepoint is not None


def random_poles(rng, count, ring=(0.9, 1.05), include_constant_atom=True):
    mags = rng.uniform(ring[0], ring[1], size=count)
    phases = rng.uniform(0.05 * np.pi, 0.95 * np.pi, size=count)
    return PoleSet(mags, phases, kinds=(COMPLEX,) * count, include_constant_atom=include_constant_atom)


def _segment(rng, num_rows, num_cols, spec):
    poles = random_poles(rng, spec.pole_count, spec.ring, spec.include_constant_atom)
    d = build_dictionary(poles, max(num_rows, 2)).matrix[:num_rows]
    code = rng.standard_normal((d.shape[1], num_cols))
    return poles, code, d @ code


def synth_corpus(spec, seed=0):
    """Generate ``spec.num_seqs`` sequences; bit-identical for a fixed seed."""
    rng = np.random.default_rng(seed)
    skeletal = spec.num_joints is not None
    m = 2 * spec.num_joints if skeletal else spec.num_features
    t = spec.num_frames
    out = []
    for _ in range(spec.num_seqs):
        cp = spec.changepoint
        if cp is None:
            poles, code, clean = _segment(rng, t, m, spec)
            after = code_after = None
        else:
            if not 0 < cp < t:
                raise ValueError("changepoint must lie strictly inside the sequence")
            poles, code, first = _segment(rng, cp, m, spec)
            after, code_after, second = _segment(rng, t - cp, m, spec)
            clean = np.vstack([first, second])
        skel = None
        if skeletal:
            # without a constant atom an offset would not be representable
            center = spec.pixel_center if spec.include_constant_atom else 0.0
            clean = center + spec.pixel_scale * clean
            code = spec.pixel_scale * code
            if code_after is not None:
                code_after = spec.pixel_scale * code_after
            if spec.include_constant_atom:
                # column 0 is the constant atom, so the offset stays in the code
                code[0] += spec.pixel_center
                if code_after is not None:
                    code_after[0] += spec.pixel_center
        y = clean + spec.noise_sigma * rng.standard_normal(clean.shape) if spec.noise_sigma else clean.copy()
        if skeletal:
            skel = SkeletonSequence(y.copy(), None, bbox_from_coords(y))
        out.append(SynthSequence(y, clean, poles, code, cp, after, code_after, skel))
    return out
