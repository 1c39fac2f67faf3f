"""Skeleton sequences and their JSON-lines / CSV serialisation.

JSON lines: one record per frame::

    {"frame": 0, "joints": [[x, y], ...], "visible": [true, ...], "bbox": [x, y, w, h]}

CSV: a header row followed by one row per frame with columns
``frame, x_1, y_1, ..., x_J, y_J, v_1, ..., v_J, bbox_x, bbox_y, bbox_w, bbox_h``
where ``v_j`` is 0/1 and empty bbox cells mean "no box".
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SkeletonSequence",
    "read_jsonl",
    "write_jsonl",
    "read_csv",
    "write_csv",
    "bbox_from_coords",
]


@dataclass
class SkeletonSequence:
    """``T x 2J`` joint coordinates, ``T x J`` visibility and optional boxes.

    Row ``k`` of ``coords`` is ``[x_1, y_1, ..., x_J, y_J]``.  ``bbox`` is
    ``T x 4`` (x, y, width, height) or ``None``; rows of NaN mark frames
    without a box.
    """

    coords: np.ndarray
    visibility: np.ndarray = None
    bbox: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] % 2 or c.shape[1] < 2:
            raise ValueError(f"coords must be T x 2J with J >= 1, got shape {c.shape}")
        t, j = c.shape[0], c.shape[1] // 2
        vis = np.ones((t, j), dtype=bool) if self.visibility is None else np.asarray(self.visibility, dtype=bool)
        if vis.shape != (t, j):
            raise ValueError(f"visibility must be {t} x {j}, got {vis.shape}")
        xy = c.reshape(t, j, 2)
        if not np.all(np.isfinite(xy[vis])):
            raise ValueError("visible joints must have finite coordinates")
        box = None
        if self.bbox is not None:
            box = np.asarray(self.bbox, dtype=float)
            if box.shape != (t, 4):
                raise ValueError(f"bbox must be {t} x 4, got {box.shape}")
            present = ~np.isnan(box).any(axis=1)
            if np.any(box[present, 2:] <= 0):
                raise ValueError("bbox width and height must be positive")
        self.coords, self.visibility, self.bbox = c, vis, box

    @property
    def num_frames(self):
        return self.coords.shape[0]

    @property
    def num_joints(self):
        return self.coords.shape[1] // 2

    def joints(self):
        """Coordinates as a ``T x J x 2`` array."""
        return self.coords.reshape(self.num_frames, self.num_joints, 2)

    def frames(self, indices):
        idx = np.asarray(indices, dtype=int)
        return SkeletonSequence(
            self.coords[idx],
            self.visibility[idx],
            None if self.bbox is None else self.bbox[idx],
        )

    def __len__(self):
        return self.num_frames


def bbox_from_coords(coords, margin=0.1):
    """Tight per-frame boxes around all joints, enlarged by ``margin``."""
    c = np.asarray(coords, dtype=float)
    xy = c.reshape(c.shape[0], -1, 2)
    lo, hi = xy.min(axis=1), xy.max(axis=1)
    size = np.maximum(hi - lo, 1.0)
    lo = lo - margin * size
    size = size * (1 + 2 * margin)
    return np.column_stack([lo, size])


def _records_to_sequence(records):
    records = sorted(records, key=lambda r: r["frame"])
    frames = [r["frame"] for r in records]
    if frames != list(range(frames[0], frames[0] + len(frames))):
        raise ValueError("frame numbers must be consecutive")
    coords = np.array([np.asarray(r["joints"], dtype=float).reshape(-1) for r in records])
    j = coords.shape[1] // 2
    vis = np.array([r.get("visible", [True] * j) for r in records], dtype=bool)
    boxes = [r.get("bbox") for r in records]
    bbox = None
    if any(b is not None for b in boxes):
        bbox = np.array([b if b is not None else [np.nan] * 4 for b in boxes], dtype=float)
    return SkeletonSequence(coords, vis, bbox)


def read_jsonl(path_or_lines):
    if isinstance(path_or_lines, (str, Path)):
        lines = Path(path_or_lines).read_text().splitlines()
    else:
        lines = list(path_or_lines)
    records = [json.loads(line) for line in lines if line.strip()]
    if not records:
        raise ValueError("no skeleton records")
    return _records_to_sequence(records)


def sequence_records(seq, first_frame=0):
    out = []
    for k in range(seq.num_frames):
        rec = {
            "frame": first_frame + k,
            "joints": seq.joints()[k].tolist(),
            "visible": [bool(v) for v in seq.visibility[k]],
        }
        if seq.bbox is not None and not np.isnan(seq.bbox[k]).any():
            rec["bbox"] = seq.bbox[k].tolist()
        out.append(rec)
    return out


def write_jsonl(seq, path=None):
    text = "".join(json.dumps(r) + "\n" for r in sequence_records(seq))
    if path is not None:
        Path(path).write_text(text)
    return text


def _csv_header(j):
    cols = ["frame"]
    for i in range(1, j + 1):
        cols += [f"x_{i}", f"y_{i}"]
    cols += [f"v_{i}" for i in range(1, j + 1)]
    return cols + ["bbox_x", "bbox_y", "bbox_w", "bbox_h"]


def write_csv(seq, path=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_csv_header(seq.num_joints))
    for k in range(seq.num_frames):
        box = [""] * 4
        if seq.bbox is not None and not np.isnan(seq.bbox[k]).any():
            box = [repr(float(v)) for v in seq.bbox[k]]
        writer.writerow(
            [k]
            + [repr(float(v)) for v in seq.coords[k]]
            + [int(v) for v in seq.visibility[k]]
            + box
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path_or_text):
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    else:
        text = path_or_text
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    j = sum(1 for h in header if h.startswith("v_"))
    coords = np.array([[float(v) for v in r[1 : 1 + 2 * j]] for r in body])
    vis = np.array([[bool(int(v)) for v in r[1 + 2 * j : 1 + 3 * j]] for r in body])
    boxes = [r[1 + 3 * j : 5 + 3 * j] for r in body]
    bbox = None
    if any(all(b) for b in boxes):
        bbox = np.array([[float(v) for v in b] if all(b) else [np.nan] * 4 for b in boxes])
    return SkeletonSequence(coords, vis, bbox)
