"""``dynkeys`` command line.

Every subcommand accepts the global flags ``--seed``, ``--config`` (a JSON
document with ``SelectorConfig`` fields plus an optional ``"dictionary"``
entry) and ``--out`` (output directory; results go to stdout when omitted).

Sequence inputs may be ``.npy``, ``.csv`` (numeric, optional header),
``.json`` (list of rows) or skeleton ``.jsonl`` files.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .coding import as_sequence
from .dictionary import build_dictionary, init_pole_ring, load_dictionary, save_dictionary, truncate_rows
from .hpim import interpolate, pipeline
from .learning import train_dictionary
from .online import init_online, step
from .pck import PckConfig, eval_pck
from .selection import SelectorConfig, brute_force_select, select_keyframes
from .skeleton import SkeletonSequence, read_csv, read_jsonl, write_jsonl
from .synth import SynthSpec, synth_corpus

__all__ = ["main", "build_parser"]


def _load_config(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _selector(args):
    doc = dict(args.config_doc)
    doc.setdefault("seed", args.seed)
    return SelectorConfig.from_dict(doc)


def _dictionary(args, num_rows, path=None):
    """Dictionary from ``path``, the config's ``"dictionary"`` entry or the default ring."""
    path = path or getattr(args, "dict", None)
    if path:
        d = load_dictionary(path)
        if d.num_rows < num_rows:
            raise SystemExit(f"dictionary has {d.num_rows} rows, sequence has {num_rows} frames")
        return d if d.num_rows == num_rows else truncate_rows(d, num_rows)
    spec = args.config_doc.get("dictionary", {})
    if "path" in spec:
        return _dictionary(args, num_rows, spec["path"])
    poles = init_pole_ring(
        int(spec.get("ring_poles", 2 * num_rows)),
        ring=tuple(spec.get("ring", (0.85, 1.15))),
        seed=int(spec.get("seed", args.seed)),
        include_constant_atom=bool(spec.get("include_constant_atom", True)),
    )
    return build_dictionary(poles, num_rows, normalize=bool(spec.get("normalize", False)))


def load_sequence(path):
    """``T x M`` array, or a :class:`SkeletonSequence` for ``.jsonl`` input."""
    p = Path(path)
    if p.suffix == ".npy":
        return as_sequence(np.load(p))
    if p.suffix == ".jsonl":
        return read_jsonl(p)
    if p.suffix == ".json":
        doc = json.loads(p.read_text())
        return as_sequence(doc["y"] if isinstance(doc, dict) else doc)
    text = p.read_text()
    first = text.splitlines()[0]
    if "x_1" in first and "v_1" in first:
        return read_csv(text)
    skip = 0 if _numeric(first) else 1
    return as_sequence(np.loadtxt(p, delimiter=",", skiprows=skip, ndmin=2))


def _numeric(line):
    try:
        [float(v) for v in line.split(",")]
        return True
    except ValueError:
        return False


def _features(obj):
    return obj.coords if isinstance(obj, SkeletonSequence) else obj


def _emit(args, name, doc):
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _indices(text):
    return [int(v) for v in text.replace(",", " ").split()]


# subcommands -----------------------------------------------------------------


def cmd_synth(args):
    doc = dict(args.config_doc.get("synth", {}))
    for key in ("num_seqs", "num_frames", "num_features", "num_joints", "pole_count", "noise_sigma", "changepoint"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    spec = SynthSpec.from_dict(doc)
    corpus = synth_corpus(spec, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    index = {"spec": spec.to_dict(), "seed": args.seed, "sequences": []}
    for i, s in enumerate(corpus):
        name = f"seq_{i:03d}"
        np.save(out / f"{name}.npy", s.y)
        entry = {
            "name": name,
            "poles": [[float(m), float(p)] for m, p in zip(s.poles.magnitudes, s.poles.phases)],
            "changepoint": s.changepoint,
        }
        if s.skeleton is not None:
            write_jsonl(s.skeleton, out / f"{name}.jsonl")
        index["sequences"].append(entry)
    (out / "corpus.json").write_text(json.dumps(index, indent=2) + "\n")
    print(f"wrote {len(corpus)} sequences to {out}")


def cmd_select(args):
    y = _features(load_sequence(args.input))
    d = _dictionary(args, y.shape[0])
    res = select_keyframes(d, y, _selector(args))
    _emit(args, "selection.json", res.to_json())


def cmd_oracle(args):
    y = _features(load_sequence(args.input))
    d = _dictionary(args, y.shape[0])
    cfg = _selector(args)
    rho = args.rho if args.rho is not None else cfg.effective_rho(d)
    idx, val = brute_force_select(d, y, args.r, rho=rho, budget=args.budget)
    _emit(args, "oracle.json", {"indices": [int(i) for i in idx], "recovery": val, "rho": rho, "r": args.r})


def cmd_interpolate(args):
    skel = load_sequence(args.skeleton)
    if not isinstance(skel, SkeletonSequence):
        skel = SkeletonSequence(skel)
    d = _dictionary(args, skel.num_frames)
    idx = np.array(_indices(args.keys))
    h = interpolate(d, idx, skel.coords[idx], jitter=args.jitter)
    text = write_jsonl(SkeletonSequence(h, skel.visibility, skel.bbox))
    _write_text(args, "interpolated.jsonl", text)


def _write_text(args, name, text):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_pipeline(args):
    skel = load_sequence(args.skeleton)
    if not isinstance(skel, SkeletonSequence):
        skel = SkeletonSequence(skel)
    feats = _features(load_sequence(args.features)) if args.features else skel.coords
    window = args.window or min(40, feats.shape[0])
    fdict = _dictionary(args, window, args.feature_dict)
    pdict = _dictionary(args, window, args.pose_dict) if args.pose_dict else fdict
    res = pipeline(fdict, pdict, feats, skel, _selector(args), window=window, jitter=args.jitter)
    _write_text(args, "pipeline.jsonl", write_jsonl(res.skeletons))
    if args.out:
        doc = {"indices": [int(i) for i in res.indices], "windows": res.windows}
        (Path(args.out) / "pipeline_selection.json").write_text(json.dumps(doc, indent=2) + "\n")


def _stream_rows(lines):
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if "features" in rec:
            vec = np.asarray(rec["features"], dtype=float).reshape(-1)
        else:
            vec = np.asarray(rec["joints"], dtype=float).reshape(-1)
        yield rec.get("frame"), vec


def cmd_online(args):
    """Read one JSON frame record per line, write one decision per line.

    The first ``--tb`` frames are buffered and batch-selected; their
    decisions carry ``residual: null``.
    """
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    src = open(args.input) if args.input else sys.stdin
    out = open(Path(args.out) / "online.jsonl", "w") if args.out else sys.stdout
    cfg = _selector(args)
    buf, state = [], None
    try:
        for k, (frame, vec) in enumerate(_stream_rows(src)):
            frame = k if frame is None else frame
            if state is None:
                buf.append((frame, vec))
                if len(buf) < args.tb:
                    continue
                y = np.vstack([v for _, v in buf])
                d = _dictionary(args, args.tb)
                state = init_online(d, y, cfg, tau=args.tau, jitter=args.jitter)
                chosen = set(state.selected)
                for j, (f, _) in enumerate(buf):
                    out.write(json.dumps({"frame": f, "admitted": j in chosen, "residual": None}) + "\n")
                continue
            _, admitted = step(state, vec)
            rec = state.history[-1]
            out.write(json.dumps({"frame": frame, "admitted": bool(admitted), "residual": rec["residual"]}) + "\n")
            out.flush()
        if state is None and buf:
            raise SystemExit(f"stream ended after {len(buf)} frames, fewer than --tb {args.tb}")
    finally:
        if args.input:
            src.close()
        if args.out:
            out.close()


def cmd_train_dict(args):
    corpus = [_features(load_sequence(p)) for p in args.inputs]
    t = corpus[0].shape[0]
    init = init_pole_ring(args.poles, ring=tuple(args.ring), seed=args.seed)
    poles, trace = train_dictionary(init, corpus, alpha=args.alpha, epochs=args.epochs, lr=args.lr)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_dictionary(build_dictionary(poles, t), out / "dictionary.json")
    (out / "train_trace.json").write_text(
        json.dumps(
            {
                "loss_trace": trace,
                "config": {
                    "alpha": args.alpha,
                    "epochs": args.epochs,
                    "lr": args.lr,
                    "poles": args.poles,
                    "ring": list(args.ring),
                    "seed": args.seed,
                },
            },
            indent=2,
        )
        + "\n"
    )
    print(f"loss {trace[0]:.6g} -> {trace[-1]:.6g}; dictionary written to {out / 'dictionary.json'}")


def cmd_eval_pck(args):
    pred, gt = load_sequence(args.pred), load_sequence(args.gt)
    if not isinstance(gt, SkeletonSequence) or gt.bbox is None:
        raise SystemExit("ground truth must be a skeleton file with bounding boxes")
    if not isinstance(pred, SkeletonSequence):
        pred = SkeletonSequence(pred)
    groups = json.loads(args.groups) if args.groups else None
    rep = eval_pck(pred, gt, PckConfig(args.beta), groups)
    _emit(args, "pck.json", {**rep.to_dict(), "beta": args.beta})


def _report(args, rep, name):
    if args.out:
        paths = bench.write_report(rep, args.out, name)
        print("wrote " + ", ".join(str(p) for p in paths))
    else:
        sys.stdout.write(json.dumps(bench._jsonable({k: v for k, v in rep.items() if k != "rows"}), indent=2) + "\n")


def cmd_bench_table2(args):
    d, corpus = bench.pinned_table2(num_frames=args.frames, num_seqs=args.num_seqs)
    if args.config_doc.get("dictionary") or getattr(args, "dict", None):
        d = _dictionary(args, args.frames)
    rep = bench.bench_table2(corpus, d, _selector(args), n_random=args.n_random, budget=args.budget, seed=args.seed)
    _report(args, rep, "table2")


def cmd_bench_online(args):
    dicts, corpus = bench.pinned_online(num_seqs=args.num_seqs)
    doc = dict(args.config_doc)
    cfg = SelectorConfig.from_dict({**bench.online_config().to_dict(), "seed": args.seed, **doc})
    sweep = [int(v) for v in args.sweep.split(",")] if args.sweep else None
    rep = bench.bench_online(corpus, dicts, cfg, t_b=args.tb, t_o=args.to, tau=args.tau, sweep=sweep)
    _report(args, rep, "online")


# parser ----------------------------------------------------------------------


def build_parser():
    def globals_(default):
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=0 if default else argparse.SUPPRESS)
        g.add_argument("--config", default=None if default else argparse.SUPPRESS,
                       help="JSON file: SelectorConfig fields and optional 'dictionary'")
        g.add_argument("--out", default=None if default else argparse.SUPPRESS,
                       help="output directory (stdout when omitted)")
        return g

    # global flags work before or after the subcommand
    common = globals_(False)
    p = argparse.ArgumentParser(prog="dynkeys", description="Dynamics-based key-frame selection.", parents=[globals_(True)])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "generate a seeded synthetic corpus")
    sp.add_argument("--num-seqs", dest="num_seqs", type=int)
    sp.add_argument("--frames", dest="num_frames", type=int)
    sp.add_argument("--features", dest="num_features", type=int)
    sp.add_argument("--joints", dest="num_joints", type=int)
    sp.add_argument("--poles", dest="pole_count", type=int)
    sp.add_argument("--noise", dest="noise_sigma", type=float)
    sp.add_argument("--changepoint", type=int)

    sp = add("select", cmd_select, "select key frames of one sequence")
    sp.add_argument("input")
    sp.add_argument("--dict", help="dictionary JSON")

    sp = add("oracle", cmd_oracle, "exhaustive best subset of r frames")
    sp.add_argument("input")
    sp.add_argument("-r", type=int, required=True)
    sp.add_argument("--dict")
    sp.add_argument("--rho", type=float, help="absolute rho (default: the selector's)")
    sp.add_argument("--budget", type=int, default=10**6)

    sp = add("interpolate", cmd_interpolate, "interpolate a skeleton sequence from key frames")
    sp.add_argument("skeleton", help="skeleton .jsonl/.csv; only the key-frame rows are read")
    sp.add_argument("--keys", required=True, help="key-frame indices, e.g. '0,5,9'")
    sp.add_argument("--dict")
    sp.add_argument("--jitter", type=float, default=0.0)

    sp = add("pipeline", cmd_pipeline, "select on features, then interpolate skeletons")
    sp.add_argument("skeleton", help="key-frame skeleton source (.jsonl/.csv)")
    sp.add_argument("--features", help="feature sequence (default: the skeleton coordinates)")
    sp.add_argument("--feature-dict", dest="feature_dict")
    sp.add_argument("--pose-dict", dest="pose_dict")
    sp.add_argument("--window", type=int)
    sp.add_argument("--jitter", type=float, default=0.0)

    sp = add("online", cmd_online, "streaming key-frame detection on JSON lines")
    sp.add_argument("--input", help="JSON-lines stream (default stdin)")
    sp.add_argument("--tb", type=int, default=30, help="initial block length")
    sp.add_argument("--tau", type=float, default=0.15)
    sp.add_argument("--jitter", type=float, default=0.0)
    sp.add_argument("--dict")

    sp = add("train-dict", cmd_train_dict, "learn dictionary poles from sequences")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--poles", type=int, default=16)
    sp.add_argument("--ring", type=float, nargs=2, default=(0.85, 1.15))
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--lr", type=float, default=1e-3)

    sp = add("eval-pck", cmd_eval_pck, "PCK of predicted against ground-truth skeletons")
    sp.add_argument("pred")
    sp.add_argument("gt")
    sp.add_argument("--beta", type=float, default=0.2)
    sp.add_argument("--groups", help='JSON mapping, e.g. \'{"arms": [2, 3]}\'')

    sp = add("bench-table2", cmd_bench_table2, "selection methods at matched cardinality")
    sp.add_argument("--frames", type=int, default=8)
    sp.add_argument("--num-seqs", dest="num_seqs", type=int, default=50)
    sp.add_argument("--n-random", dest="n_random", type=int, default=100)
    sp.add_argument("--budget", type=int, default=10**5)

    sp = add("bench-online", cmd_bench_online, "online against batch selection")
    sp.add_argument("--tb", type=int, default=30)
    sp.add_argument("--to", type=int, default=10)
    sp.add_argument("--tau", type=float, default=bench.ONLINE_TAU)
    sp.add_argument("--sweep", help="comma-separated T_b values, e.g. 5,10,15,20,25,30")
    sp.add_argument("--num-seqs", dest="num_seqs", type=int, default=20)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.config_doc = _load_config(args.config)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
