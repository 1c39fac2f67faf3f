"""Incremental key-frame detection.

After a batch selection on an initial block of frames, each incoming frame is
compared with the prediction obtained from the current key frames: their
minimum-norm code, decoded with the dictionary extended by one row.  A frame
whose relative prediction residual exceeds ``tau`` carries information the
key frames cannot explain and is admitted as a new key frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import SingularSystemError, as_sequence, min_norm_code, pinv_code
from .dictionary import extend_rows, truncate_rows
from .selection import SelectorConfig, select_keyframes

__all__ = ["OnlineState", "init_online", "predict_next", "step", "run_stream"]

EPS = 1e-12


@dataclass
class OnlineState:
    """Mutable detector state for one stream.

    ``dict`` has one row per frame seen so far; ``selected`` holds the key
    frame indices in increasing order and ``key_rows`` their features.
    """

    dict: object
    selected: list
    key_rows: np.ndarray
    tau: float = 0.15
    jitter: float = 0.0
    history: list = field(default_factory=list)

    @property
    def num_frames(self):
        return self.dict.num_rows

    @property
    def feature_dim(self):
        return self.key_rows.shape[1]


def init_online(dictionary, seq_prefix, cfg=None, tau=0.15, jitter=0.0):
    """Seed a detector with a batch selection on the first ``T_b`` frames.

    ``dictionary`` may have any number of rows; it is cut or extended to
    ``T_b`` rows with its column scaling unchanged.
    """
    y = as_sequence(seq_prefix, "seq_prefix")
    t_b = y.shape[0]
    if t_b < 2:
        raise ValueError("the initial block needs at least 2 frames")
    if tau <= 0:
        raise ValueError("tau must be positive")
    d = _resized(dictionary, t_b)
    res = select_keyframes(d, y, cfg or SelectorConfig())
    idx = [int(i) for i in res.indices]
    return OnlineState(d, idx, y[idx].copy(), float(tau), float(jitter))


def _resized(dictionary, num_rows):
    if dictionary.num_rows == num_rows:
        return dictionary
    if dictionary.num_rows > num_rows:
        return truncate_rows(dictionary, num_rows)
    return extend_rows(dictionary, num_rows - dictionary.num_rows)


def predict_next(state):
    """Predicted features of frame ``T`` (0-based) from the current key frames.

    When the key rows of the dictionary are dependent (more key frames than
    atoms) and ``state.jitter`` is zero, the pseudo-inverse code is used.
    """
    if not state.selected:
        raise ValueError("prediction needs at least one key frame")
    try:
        code = min_norm_code(state.dict, state.selected, state.key_rows, jitter=state.jitter)
    except SingularSystemError:
        if state.jitter:
            raise
        code = pinv_code(state.dict, state.selected, state.key_rows)
    row = extend_rows(state.dict, 1).matrix[-1]
    return row @ code.matrix


def step(state, incoming):
    """Process one frame; returns ``(state, admitted)``.

    The relative residual ``||y - y_hat|| / max(||y||, 1e-12)`` is compared
    with ``state.tau``; with no key frame yet the prediction is zero.  The
    dictionary always grows by one row, the key set only on admission.  The
    state is updated in place and also returned.
    """
    y = np.asarray(incoming, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise ValueError("incoming frame has non-finite entries")
    if state.key_rows.shape[1] != y.size and state.selected:
        raise ValueError(f"expected {state.key_rows.shape[1]} features, got {y.size}")
    pred = predict_next(state) if state.selected else np.zeros_like(y)
    residual = float(np.linalg.norm(y - pred) / max(np.linalg.norm(y), EPS))
    admitted = residual > state.tau
    frame = state.dict.num_rows
    if admitted:
        state.selected.append(frame)
        rows = state.key_rows if state.key_rows.size else np.empty((0, y.size))
        state.key_rows = np.vstack([rows, y[None, :]])
    state.dict = extend_rows(state.dict, 1)
    state.history.append({"frame": frame, "admitted": bool(admitted), "residual": residual})
    return state, admitted


def run_stream(dictionary, frames, t_b, cfg=None, tau=0.15, jitter=0.0):
    """Batch-select on the first ``t_b`` frames, then stream the rest."""
    y = as_sequence(frames)
    state = init_online(dictionary, y[:t_b], cfg, tau, jitter)
    for row in y[t_b:]:
        step(state, row)
    return state
