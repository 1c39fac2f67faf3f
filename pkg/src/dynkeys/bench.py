"""Benchmark protocols and the pinned corpora they run on.

``bench_table2`` compares the relaxed selector against uniform spacing, the
best of ``n`` random subsets and (when affordable) brute force at the same
cardinality.  ``bench_online`` compares online detection with batch
selection over a sweep of initial block lengths.  Both return plain dicts
that embed the configuration used and can be written as CSV + JSON.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .coding import SingularSystemError, decode, pinv_code
from .dictionary import build_dictionary, dictionary_to_dict, init_pole_ring, truncate_rows
from .hpim import interpolate
from .online import run_stream
from .pck import PckConfig, eval_pck
from .selection import (
    Indicator,
    SelectorConfig,
    baseline_select,
    brute_force_select,
    reconstruction_error,
    recovery,
    select_keyframes,
)
from .skeleton import SkeletonSequence
from .synth import SynthSpec, synth_corpus

__all__ = [
    "TABLE2_SEEDS",
    "ONLINE_SEED",
    "pinned_table2",
    "pinned_online",
    "online_config",
    "bench_table2",
    "bench_online",
    "write_report",
    "table_csv",
]

TABLE2_SEEDS = (3, 4)
ONLINE_SEED = 7
ONLINE_TAU = 0.15


def pinned_table2(num_frames=8, num_seqs=50, num_features=6, num_joints=None):
    """Ring dictionary and a half stationary, half change-point corpus.

    The change point sits in the middle of the sequence.  With
    ``num_joints`` the sequences are skeletons (features = coordinates).
    """
    half = num_seqs // 2
    common = dict(num_frames=num_frames, num_features=num_features, num_joints=num_joints, pole_count=2)
    spec_a = SynthSpec(num_seqs=num_seqs - half, **common)
    spec_b = SynthSpec(num_seqs=half, changepoint=num_frames // 2, **common)
    corpus = synth_corpus(spec_a, TABLE2_SEEDS[0]) + synth_corpus(spec_b, TABLE2_SEEDS[1])
    d = build_dictionary(init_pole_ring(2 * num_frames, seed=1), num_frames)
    return d, corpus


def online_config():
    """Selector setting used for the online protocol (sparser penalty)."""
    return SelectorConfig(lam=0.1)


def pinned_online(num_seqs=20, num_frames=40, num_features=6, pole_count=2, num_joints=None):
    """Exactly representable sequences with their generating dictionaries."""
    spec = SynthSpec(
        num_seqs=num_seqs, num_frames=num_frames, num_features=num_features, num_joints=num_joints, pole_count=pole_count
    )
    corpus = synth_corpus(spec, ONLINE_SEED)
    dicts = [build_dictionary(s.poles, num_frames) for s in corpus]
    return dicts, corpus


def _as_list(dictionaries, n):
    if isinstance(dictionaries, (list, tuple)):
        if len(dictionaries) != n:
            raise ValueError("need one dictionary per sequence")
        return list(dictionaries)
    return [dictionaries] * n


def _seq(item):
    return item.y if hasattr(item, "y") else np.asarray(item, dtype=float)


def _skeleton(item):
    return getattr(item, "skeleton", None)


def _interpolate(d, idx, h_r):
    """Interpolation, or the pseudo-inverse code when the key rows are dependent."""
    try:
        return interpolate(d, idx, h_r)
    except SingularSystemError:
        return decode(d, pinv_code(d, idx, h_r))


def _fidelity(h, idx, h_r):
    num = np.linalg.norm(h[idx] - h_r)
    return float(num / max(np.linalg.norm(h_r), np.finfo(float).tiny))


def bench_table2(corpus, dictionary, cfg=None, n_random=100, budget=10**5, seed=0, pose_dict=None, pck=None):
    """Per-sequence comparison of selection methods at matched cardinality.

    ``recovery`` is the relaxed recovery term at the selector's absolute
    ``rho``; ``reconstruction`` is the exact minimum-norm error
    ``||Y - D C_r||^2``.  For sequences carrying a skeleton, each selection
    is also scored by PCK after interpolation with ``pose_dict`` (defaults to
    ``dictionary``), and the key-frame fidelity of the interpolation is
    recorded.
    """
    cfg = cfg or SelectorConfig()
    pck = pck or PckConfig()
    dicts = _as_list(dictionary, len(corpus))
    rows = []
    for i, (item, d) in enumerate(zip(corpus, dicts)):
        y = _seq(item)
        t = y.shape[0]
        res = select_keyframes(d, y, cfg)
        r = res.count
        row = {
            "seq": i,
            "nonstationary": bool(getattr(item, "nonstationary", False)),
            "r": r,
            "rho": res.rho,
        }
        methods = {"selected": res.indicator}
        if r > 0:
            methods["uniform"] = baseline_select("uniform", d, y, r)
            methods["best_of_random"] = baseline_select("best_of_random", d, y, r, n=n_random, seed=seed + i, rho=res.rho)
            if math.comb(t, r) <= budget:
                idx, _ = brute_force_select(d, y, r, rho=res.rho, budget=budget)
                methods["brute_force"] = Indicator.from_indices(idx, t)
        skel = _skeleton(item)
        pdict = pose_dict or d
        for name, ind in methods.items():
            idx = ind.indices()
            row[f"{name}_indices"] = " ".join(str(int(k)) for k in idx)
            row[f"{name}_recovery"] = float(recovery(d, y, ind, res.rho))
            row[f"{name}_reconstruction"] = reconstruction_error(d, y, idx)
            if skel is not None and idx.size:
                h = _interpolate(pdict, idx, skel.coords[idx])
                pred = SkeletonSequence(h, skel.visibility, skel.bbox)
                row[f"{name}_pck"] = eval_pck(pred, skel, pck).mean
                row[f"{name}_keyframe_fidelity"] = _fidelity(h, idx, skel.coords[idx])
        rows.append(row)
    return {
        "protocol": "table2",
        "config": {
            "selector": cfg.to_dict(),
            "dictionary": _dict_doc(dictionary),
            "n_random": n_random,
            "budget": budget,
            "seed": seed,
            "pck_beta": pck.beta,
        },
        "rows": rows,
        "summary": _table2_summary(rows),
    }


def _dict_doc(dictionary):
    if isinstance(dictionary, (list, tuple)):
        return "per-sequence"
    return dictionary_to_dict(dictionary)


def _table2_summary(rows):
    out = {"num_seqs": len(rows), "empty_selections": sum(r["r"] == 0 for r in rows)}
    for name in ("selected", "uniform", "best_of_random", "brute_force"):
        vals = [r[f"{name}_recovery"] for r in rows if f"{name}_recovery" in r]
        if vals:
            out[f"{name}_mean_recovery"] = float(np.mean(vals))
        pcks = [r[f"{name}_pck"] for r in rows if f"{name}_pck" in r]
        if pcks:
            out[f"{name}_mean_pck"] = float(np.mean(pcks))
    bf = [r for r in rows if "brute_force_recovery" in r]
    if bf:
        out["within_1.5x_brute_force"] = float(
            np.mean([r["selected_recovery"] <= 1.5 * r["brute_force_recovery"] for r in bf])
        )
    ns = [r for r in rows if r["nonstationary"]]
    if ns:
        out["beats_uniform_nonstationary"] = float(
            np.mean([r["r"] > 0 and r["selected_recovery"] < r["uniform_recovery"] for r in ns])
        )
    return out


def _relative(err, y):
    e = float(np.sum(y * y))
    return err / e if e > 0 else err


def bench_online(corpus, dictionaries, cfg=None, t_b=30, t_o=10, tau=ONLINE_TAU, sweep=None, jitter=0.0, pck=None):
    """Online detection against batch selection on the first ``t_b + t_o`` frames.

    Errors are reported relative to ``||Y||_F^2``.  With ``sweep`` (a list of
    ``t_b`` values) the comparison is repeated for each value, producing the
    curve of deltas against ``t_b`` and its Spearman correlation.
    """
    cfg = cfg or SelectorConfig()
    pck = pck or PckConfig()
    dicts = _as_list(dictionaries, len(corpus))
    points = []
    for tb in sweep or [t_b]:
        points.append(_online_point(corpus, dicts, cfg, tb, t_b + t_o - tb if sweep else t_o, tau, jitter, pck))
    report = {
        "protocol": "online",
        "config": {
            "selector": cfg.to_dict(),
            "dictionary": _dict_doc(dictionaries),
            "t_b": t_b,
            "t_o": t_o,
            "tau": tau,
            "jitter": jitter,
            "sweep": list(sweep) if sweep else None,
            "pck_beta": pck.beta,
        },
        "curve": [{k: v for k, v in p.items() if k != "rows"} for p in points],
        "rows": [row for p in points for row in p["rows"]],
    }
    if sweep and len(points) > 2:
        tbs = [p["t_b"] for p in points]
        for key in ("count_delta", "recovery_delta"):
            rho = spearmanr(tbs, [p[key] for p in points]).statistic
            report[f"spearman_{key}"] = float(rho) if np.isfinite(rho) else float("nan")
    return report


def _online_point(corpus, dicts, cfg, t_b, t_o, tau, jitter, pck):
    t = t_b + t_o
    rows = []
    for i, (item, d) in enumerate(zip(corpus, dicts)):
        y = _seq(item)[:t]
        dt = d if d.num_rows == t else truncate_rows(d, t) if d.num_rows > t else None
        if dt is None:
            raise ValueError(f"dictionary has {d.num_rows} rows, need {t}")
        batch = select_keyframes(dt, y, cfg)
        state = run_stream(dt, y, t_b, cfg, tau=tau, jitter=jitter)
        b_idx, o_idx = batch.indices, np.array(state.selected, dtype=int)
        row = {
            "seq": i,
            "t_b": t_b,
            "t_o": t_o,
            "batch_count": int(b_idx.size),
            "online_count": int(o_idx.size),
            "batch_error": _relative(reconstruction_error(dt, y, b_idx), y),
            "online_error": _relative(reconstruction_error(dt, y, o_idx), y),
            "batch_indices": " ".join(map(str, b_idx)),
            "online_indices": " ".join(map(str, o_idx)),
        }
        skel = _skeleton(item)
        if skel is not None:
            gt = skel.frames(np.arange(t))
            for name, idx in (("batch", b_idx), ("online", o_idx)):
                if idx.size:
                    h = _interpolate(dt, idx, gt.coords[idx])
                    row[f"{name}_pck"] = eval_pck(SkeletonSequence(h, gt.visibility, gt.bbox), gt, pck).mean
                    row[f"{name}_keyframe_fidelity"] = _fidelity(h, idx, gt.coords[idx])
        rows.append(row)
    bc = np.array([r["batch_count"] for r in rows])
    oc = np.array([r["online_count"] for r in rows])
    be = np.array([r["batch_error"] for r in rows])
    oe = np.array([r["online_error"] for r in rows])
    point = {
        "t_b": t_b,
        "t_o": t_o,
        "batch_count": float(bc.mean()),
        "online_count": float(oc.mean()),
        "count_delta": float(np.mean(np.abs(bc - oc))),
        "max_count_delta": int(np.max(np.abs(bc - oc))),
        "batch_error": float(be.mean()),
        "online_error": float(oe.mean()),
        "recovery_delta": float(np.mean(np.abs(oe - be))),
        "rows": rows,
    }
    if all("batch_pck" in r and "online_pck" in r for r in rows):
        point["batch_pck"] = float(np.mean([r["batch_pck"] for r in rows]))
        point["online_pck"] = float(np.mean([r["online_pck"] for r in rows]))
        point["pck_delta"] = point["batch_pck"] - point["online_pck"]
    return point


def table_csv(rows):
    """CSV text of a list of dicts; columns in first-seen order."""
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_report(report, out_dir, name):
    """Write ``<name>.json`` and ``<name>.csv`` (plus ``<name>_curve.csv`` for sweeps)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{name}.json", out / f"{name}.csv"]
    paths[0].write_text(json.dumps(_jsonable(report), indent=2) + "\n")
    paths[1].write_text(table_csv(report["rows"]))
    if "curve" in report:
        paths.append(out / f"{name}_curve.csv")
        paths[-1].write_text(table_csv(report["curve"]))
    return paths
