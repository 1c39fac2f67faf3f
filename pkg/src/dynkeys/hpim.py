"""Closed-form pose interpolation from key-frame skeletons.

Given the Gram matrix ``G = D D^T`` of a pose dictionary and the skeletons
``H_r`` at the selected frames, the whole sequence is::

    H = G P_r^T (P_r G P_r^T)^{-1} H_r

which is the dictionary reconstruction from the minimum-norm code of the
key frames.  ``G`` is cached on the dictionary, so each call costs one
``r x r`` factorisation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import SingularSystemError, as_sequence, selection_indices, spd_solve
from .dictionary import truncate_rows
from .selection import Indicator, SelectorConfig, select_keyframes
from .skeleton import SkeletonSequence

__all__ = [
    "interpolate",
    "pipeline",
    "PipelineResult",
    "EmptySelectionError",
    "window_starts",
]


class EmptySelectionError(RuntimeError):
    pass


def _closest_pair(gram, idx):
    sub = gram[np.ix_(idx, idx)]
    d = np.sqrt(np.clip(np.diag(sub), np.finfo(float).tiny, None))
    corr = np.abs(sub / np.outer(d, d))
    np.fill_diagonal(corr, -np.inf)
    i, j = np.unravel_index(np.argmax(corr), corr.shape)
    return int(idx[min(i, j)]), int(idx[max(i, j)]), float(corr[i, j])


def interpolate(pose_dict, selection, key_skeletons, jitter=0.0):
    """Full ``T x 2J`` skeleton sequence from the key-frame skeletons.

    Parameters
    ----------
    pose_dict : DynDictionary
        Dictionary with ``T`` rows; its cached Gram matrix is used.
    selection : Indicator, bool mask or index array
        The ``r >= 1`` key frames.
    key_skeletons : array_like, shape (r, 2J)
        Skeletons at the key frames, in increasing frame order.
    jitter : float
        Added to the diagonal of ``P_r G P_r^T``; zero means fail on a
        singular system.

    Raises
    ------
    SingularSystemError
        Names the pair of selected frames whose dictionary rows are most
        nearly parallel.
    """
    t = pose_dict.num_rows
    idx = selection_indices(selection, t)
    if idx.size < 1:
        raise ValueError("selection must contain at least one key frame")
    h_r = as_sequence(key_skeletons, "key_skeletons")
    if h_r.shape[0] != idx.size:
        raise ValueError(f"{idx.size} key frames selected but {h_r.shape[0]} skeletons given")
    g = pose_dict.gram
    k = g[np.ix_(idx, idx)]
    if jitter:
        k = k + jitter * np.eye(idx.size)
    try:
        w = spd_solve(k, h_r, "P_r G P_r^T")
    except SingularSystemError:
        if idx.size == 1:
            raise SingularSystemError(f"frame {idx[0]} has a zero dictionary row") from None
        a, b, c = _closest_pair(g, idx)
        raise SingularSystemError(
            f"P_r G P_r^T is singular: selected frames {a} and {b} have nearly "
            f"dependent dictionary rows (|cos| = {c:.12f}); drop one or pass jitter > 0"
        ) from None
    return g[:, idx] @ w


def window_starts(num_frames, window):
    """Start frames of non-overlapping windows; the last one is right-aligned."""
    if num_frames <= window:
        return [0]
    starts = list(range(0, num_frames - window + 1, window))
    if starts[-1] + window < num_frames:
        starts.append(num_frames - window)
    return starts


def _pad(a, length):
    if a.shape[0] >= length:
        return a
    return np.vstack([a, np.repeat(a[-1:], length - a.shape[0], axis=0)])


def _fetch(source, indices):
    if isinstance(source, SkeletonSequence):
        return source.coords[indices]
    if callable(source):
        return np.asarray(source(indices), dtype=float)
    return np.asarray(source, dtype=float)[indices]


@dataclass
class PipelineResult:
    indicator: Indicator
    skeletons: SkeletonSequence
    windows: list = field(default_factory=list)

    @property
    def indices(self):
        return self.indicator.indices()


def pipeline(feature_dict, pose_dict, features, skeleton_source, cfg=None, window=None, jitter=0.0):
    """Select key frames on ``features`` and interpolate skeletons from them.

    ``skeleton_source`` supplies key-frame skeletons: a
    :class:`SkeletonSequence`, a ``T x 2J`` array, or a callable mapping an
    index array to an ``r x 2J`` array (e.g. a pose estimator run only on
    those frames).  Visibility and boxes of a :class:`SkeletonSequence`
    source are carried over to the output.

    When the sequence is longer than the dictionaries (or ``window``), it is
    processed in non-overlapping windows, the last one right-aligned; frames
    already covered by an earlier window keep that window's output.  Shorter
    sequences are padded by repeating the last frame and trimmed afterwards.

    Raises
    ------
    EmptySelectionError
        If a window ends up with no key frame (decrease ``cfg.lam``).
    """
    cfg = cfg or SelectorConfig()
    y = as_sequence(features, "features")
    t = y.shape[0]
    window = window or feature_dict.num_rows
    if feature_dict.num_rows < window or pose_dict.num_rows < window:
        raise ValueError("dictionaries must have at least `window` rows")
    fdict = feature_dict if feature_dict.num_rows == window else truncate_rows(feature_dict, window)
    pdict = pose_dict if pose_dict.num_rows == window else truncate_rows(pose_dict, window)

    out = None
    selected = np.zeros(t, dtype=bool)
    soft = np.zeros(t)
    covered = 0
    windows = []
    for start in window_starts(t, window):
        stop = min(start + window, t)
        frames = np.arange(start, stop)
        y_w = _pad(y[start:stop], window)
        res = select_keyframes(fdict, y_w, cfg)
        idx = res.indices
        if idx.size == 0:
            raise EmptySelectionError(
                f"no key frame selected in window starting at frame {start}; use a smaller lam"
            )
        # padded frames repeat the last real frame
        src = np.minimum(start + idx, t - 1)
        h_r = _fetch(skeleton_source, src)
        h_w = interpolate(pdict, idx, h_r, jitter=jitter)
        if out is None:
            out = np.empty((t, h_w.shape[1]))
        new = frames >= covered
        out[frames[new]] = h_w[: stop - start][new]
        soft[frames[new]] = res.indicator.values[: stop - start][new]
        # key frames inside an overlap keep their fetched skeleton
        real = idx < stop - start
        out[start + idx[real]] = h_r[real]
        selected[start + idx[real]] = True
        covered = stop
        windows.append({"start": int(start), "stop": int(stop), "indices": [int(i) for i in start + idx[real]]})

    if isinstance(skeleton_source, SkeletonSequence):
        skel = SkeletonSequence(out, skeleton_source.visibility.copy(), None if skeleton_source.bbox is None else skeleton_source.bbox.copy())
    else:
        skel = SkeletonSequence(out)
    soft = np.where(selected, np.maximum(soft, np.nextafter(cfg.threshold, 1.0)), np.minimum(soft, cfg.threshold))
    return PipelineResult(Indicator(soft, cfg.threshold), skel, windows)
