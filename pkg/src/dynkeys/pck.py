"""Percentage of Correct Keypoints.

A visible ground-truth joint is correct when the predicted joint lies within
``beta * max(height, width)`` of it, the box being the ground-truth box of
that frame.  Invisible joints are left out of both counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PckConfig", "PckReport", "MissingBoxError", "eval_pck"]


class MissingBoxError(ValueError):
    pass


@dataclass(frozen=True)
class PckConfig:
    beta: float = 0.2

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")


@dataclass
class PckReport:
    """Scores in percent.

    ``per_joint`` is NaN for a joint never visible; ``mean`` averages the
    per-joint scores that are defined.  ``groups`` maps a group name to the
    mean over its joints.
    """

    per_joint: np.ndarray
    mean: float
    groups: dict
    correct: np.ndarray
    visible: np.ndarray

    def to_dict(self):
        return {
            "per_joint": [None if np.isnan(v) else float(v) for v in self.per_joint],
            "mean": float(self.mean),
            "groups": {k: float(v) for k, v in self.groups.items()},
        }


def eval_pck(pred, gt, cfg=None, groups=None):
    """Score ``pred`` against ``gt`` (both :class:`SkeletonSequence`).

    Parameters
    ----------
    groups : dict of str -> list of int, optional
        Joint groups (0-based joint indices) reported separately.

    Raises
    ------
    MissingBoxError
        Naming the first frame with visible joints but no ground-truth box.
    """
    cfg = cfg or PckConfig()
    if pred.coords.shape != gt.coords.shape:
        raise ValueError(f"pred has shape {pred.coords.shape} but gt has {gt.coords.shape}")
    vis = gt.visibility
    box = gt.bbox if gt.bbox is not None else np.full((gt.num_frames, 4), np.nan)
    missing = np.isnan(box).any(axis=1) & vis.any(axis=1)
    if missing.any():
        raise MissingBoxError(f"frame {int(np.flatnonzero(missing)[0])} has visible joints but no bbox")
    radius = cfg.beta * np.max(np.nan_to_num(box[:, 2:]), axis=1)
    err = np.linalg.norm(pred.joints() - gt.joints(), axis=2)
    correct = (err <= radius[:, None]) & vis
    n_vis = vis.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_joint = np.where(n_vis > 0, 100.0 * correct.sum(axis=0) / n_vis, np.nan)
    defined = ~np.isnan(per_joint)
    mean = float(np.mean(per_joint[defined])) if defined.any() else float("nan")
    out = {}
    for name, joints in (groups or {}).items():
        vals = per_joint[list(joints)]
        vals = vals[~np.isnan(vals)]
        out[name] = float(np.mean(vals)) if vals.size else float("nan")
    return PckReport(per_joint, mean, out, correct, vis)
