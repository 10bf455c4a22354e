"""Command-line entry points: ``motionsphere <command> ...``.

Exit codes: 0 success, 2 usage, 3 data error, 4 numerical or convergence
error, 5 training divergence. Set ``MOTIONSPHERE_VERBOSITY`` (DEBUG, INFO,
WARNING, ...) to control log output.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .dataio import (
    SYNTH_KINDS,
    load_motion_csv,
    make_dataset,
    save_motion_csv,
    synthetic_motions,
)
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    MotionSphereError,
    ParseError,
    TrainingDivergedError,
)
from .geometry import KarcherConfig, geodesic_distance, karcher_mean
from .metrics import build_report
from .predictor import (
    Checkpoint,
    TrainConfig,
    evaluate,
    predict,
    preset,
    recursive_predict,
    train,
)
from .skeleton import chain5_topology, h36m17_topology, load_topology
from .srvf import (
    PoseSequence,
    ScaledSrvf,
    curve_to_sequence,
    resample_curve,
    sequence_to_curve,
    srvf_decode,
    srvf_encode,
)

log = logging.getLogger("motionsphere")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_DIVERGED = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# .srvf text files

def write_srvf(s, path, fps=None):
    """Header lines ``key value`` then ``data`` and one row per grid sample."""
    t_s, n = s.point.shape
    lines = ["# motionsphere srvf 1", f"T_s {t_s}", f"n {n}", f"scale {s.scale:.17g}"]
    lines.append("anchor " + " ".join(f"{v:.17g}" for v in s.anchor))
    if fps is not None:
        lines.append(f"fps {fps!r}")
    lines.append("data")
    lines += [" ".join(f"{v:.17g}" for v in row) for row in s.point]
    Path(path).write_text("\n".join(lines) + "\n")


def read_srvf(path):
    """Returns ``(ScaledSrvf, fps or None)``."""
    path = Path(path)
    head = {}
    rows = []
    in_data = False
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data:
            if line == "data":
                in_data = True
                continue
            key, _, rest = line.partition(" ")
            if key not in ("T_s", "n", "scale", "anchor", "fps"):
                raise ParseError(f"unknown header key {key!r}", path, lineno)
            head[key] = (rest.split(), lineno)
            continue
        try:
            rows.append(([float(v) for v in line.split()], lineno))
        except ValueError:
            raise ParseError("non-numeric value in data block", path, lineno)
    for key in ("T_s", "n", "scale", "anchor"):
        if key not in head:
            raise ParseError(f"missing header key {key!r}", path)
    try:
        t_s = int(head["T_s"][0][0])
        n = int(head["n"][0][0])
        scale = float(head["scale"][0][0])
        anchor = np.array([float(v) for v in head["anchor"][0]])
        fps = float(head["fps"][0][0]) if "fps" in head else None
    except (ValueError, IndexError):
        raise ParseError("malformed header value", path)
    if anchor.shape != (n,):
        raise ParseError(f"anchor has {anchor.size} values, expected n={n}", path, head["anchor"][1])
    for vals, lineno in rows:
        if len(vals) != n:
            raise ParseError(f"row has {len(vals)} values, expected n={n}", path, lineno)
    if len(rows) != t_s:
        raise ParseError(f"data block has {len(rows)} rows, header says T_s={t_s}", path)
    point = np.array([v for v, _ in rows])
    try:
        return ScaledSrvf(point, scale, anchor), fps
    except DegenerateInputError as exc:
        raise ParseError(str(exc), path)


# ---------------------------------------------------------------------------
# Commands

def cmd_encode(args):
    seq = load_motion_csv(args.input)
    curve = sequence_to_curve(seq)
    if args.grid:
        curve = resample_curve(curve, args.grid)
    s = srvf_encode(curve)
    write_srvf(s, args.output, fps=seq.fps)
    print(f"encoded {seq.num_frames} frames x {curve.shape[1]} coords, scale {s.scale:.6g}")


def cmd_decode(args):
    s, fps = read_srvf(args.input)
    if args.anchor:
        mode, ref = args.anchor
        ref_seq = load_motion_csv(ref)
        frame = ref_seq.frames[-1] if mode == "last-prior" else ref_seq.frames[0]
        anchor = frame.reshape(-1)
        if anchor.shape != s.anchor.shape:
            raise DimensionError(f"anchor file has {anchor.size} coords, SRVF has {s.anchor.size}")
        s = ScaledSrvf(s.point, s.scale, anchor)
    if s.point.shape[1] % 3:
        raise DimensionError("SRVF dimension is not a multiple of 3; cannot write joints")
    curve = srvf_decode(s, args.frames)
    seq = curve_to_sequence(curve, args.fps or fps or 25.0)
    save_motion_csv(seq, args.output)
    print(f"decoded {seq.num_frames} frames to {args.output}")


def cmd_mean(args):
    items = [read_srvf(p)[0] for p in args.inputs]
    cfg = KarcherConfig(epsilon=args.eps, threshold=args.tau, max_iters=args.max_iters)
    res = karcher_mean([s.point for s in items], cfg)
    scale = float(np.mean([s.scale for s in items]))
    anchor = np.mean([s.anchor for s in items], axis=0)
    write_srvf(ScaledSrvf(res.mean, scale, anchor), args.output)
    print(f"iterations {res.iterations}")
    print(f"final_norm {res.final_norm:.6e}")


def cmd_dist(args):
    a, _ = read_srvf(args.a)
    b, _ = read_srvf(args.b)
    if a.point.shape != b.point.shape:
        raise DimensionError(f"shape mismatch: {a.point.shape} vs {b.point.shape}")
    print(f"{geodesic_distance(a.point, b.point):.17g}")


CLI_DEFAULTS = {
    "preset": "desk",
    "data": None,
    "test_pattern": None,
    "prior_len": 10,
    "future_len": 10,
    "downsample": 1,
    "topology": "chain5",
    "checkpoint": "model.ckpt",
    "log": None,
    "manifest": None,
    "train": {},
}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_cli_config(path, overrides=()):
    """Merge defaults, a JSON config file and ``key=value`` overrides; validate keys."""
    cfg = json.loads(json.dumps(CLI_DEFAULTS))
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno)
        if not isinstance(data, dict):
            raise ParseError("config must be a JSON object", path)
        unknown = set(data) - set(CLI_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    train_keys = set(TrainConfig.__dataclass_fields__)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"override {item!r} is not key=value")
        if key.startswith("train."):
            sub = key[len("train."):]
            if sub not in train_keys:
                raise UsageError(f"unknown training key {sub!r}")
            cfg["train"][sub] = _parse_value(value)
        elif key in CLI_DEFAULTS and key != "train":
            cfg[key] = _parse_value(value)
        else:
            raise UsageError(f"unknown config key {key!r}")
    unknown = set(cfg["train"]) - train_keys
    if unknown:
        raise UsageError(f"unknown training keys: {sorted(unknown)}")
    return cfg


def _topology(name):
    if name in (None, "chain5"):
        return chain5_topology()
    if name == "h36m17":
        return h36m17_topology()
    return load_topology(name)


def _data_files(data, base):
    if data is None:
        raise UsageError("config needs 'data': a directory of CSV files or a list of files")
    paths = [data] if isinstance(data, str) else list(data)
    files = []
    for p in paths:
        p = Path(p)
        if not p.is_absolute():
            p = base / p
        if p.is_dir():
            files += sorted(p.glob("*.csv"))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"data path not found: {p}")
    if not files:
        raise UsageError("no CSV files found in the data paths")
    return files


def cmd_train(args):
    cfg = load_cli_config(args.config, args.set or ())
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    if args.seed is not None:
        cfg["train"]["seed"] = args.seed
    if args.checkpoint is not None:
        cfg["checkpoint"] = args.checkpoint
    base = Path(args.config).parent if args.config else Path.cwd()
    files = _data_files(cfg["data"], base)
    topo = _topology(cfg["topology"])
    out = Path(cfg["checkpoint"])
    if not out.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {out.parent}")
    train_cfg = TrainConfig.from_dict({**preset(cfg["preset"]).to_dict(), **cfg["train"]})

    train_ds, test_ds, manifest = make_dataset(
        files,
        topo,
        prior_len=cfg["prior_len"],
        future_len=cfg["future_len"],
        split_rule=cfg["test_pattern"],
        downsample=cfg["downsample"],
    )
    log.info("training on %d pairs (%d held out)", len(train_ds), len(test_ds))

    def progress(entry):
        rest = {k: round(v, 6) for k, v in entry.items() if k != "epoch"}
        log.info("epoch %d %s", entry["epoch"], rest)

    held_out = test_ds if len(test_ds) else None
    ckpt, logs = train(train_ds, train_cfg, test_ds=held_out, callback=progress)
    ckpt.save(out)
    if cfg["log"]:
        Path(cfg["log"]).write_text(json.dumps(logs, indent=2, sort_keys=True) + "\n")
    if cfg["manifest"]:
        Path(cfg["manifest"]).write_text(manifest.to_text())
    last = logs[-1]
    summary = f"saved {out} after {train_cfg.epochs} epochs"
    if "val_mpjpe" in last:
        summary += f"; held-out MPJPE {last['val_mpjpe']:.3f} mm"
    print(summary)


def cmd_predict(args):
    ckpt = Checkpoint.load(args.checkpoint)
    prior = load_motion_csv(args.prior)
    if prior.num_frames > ckpt.prior_len:
        # Longer recordings: condition on their most recent frames.
        prior = PoseSequence(prior.frames[-ckpt.prior_len :], prior.fps)
    if args.recursive > 1:
        out = recursive_predict(ckpt, prior, args.recursive, args.horizon)
    else:
        out = predict(ckpt, prior, args.horizon)
    save_motion_csv(out, args.output)
    print(f"wrote {out.num_frames} frames (first = last prior frame) to {args.output}")


def cmd_eval(args):
    ckpt = Checkpoint.load(args.checkpoint)
    files = _data_files(args.dataset, Path.cwd())
    _, test_ds, _ = make_dataset(
        files,
        ckpt.topology,
        prior_len=ckpt.prior_len,
        future_len=ckpt.future_len,
        split_rule=lambda name: "test",
        downsample=args.downsample,
        normalization=ckpt.normalization,
    )
    if not len(test_ds):
        raise ValueError("no windows of prior_len + future_len frames in the dataset")
    if args.predictor == "model":
        report = evaluate(ckpt, test_ds, seed=args.seed)
    else:
        rec = ckpt.normalization
        priors = [rec.invert(p.frames) for p, _ in test_ds.samples]
        truths = [rec.invert(f.frames) for _, f in test_ds.samples]
        preds = [np.repeat(p[-1:], len(t), axis=0) for p, t in zip(priors, truths)]
        report = build_report(preds, truths, priors, test_ds.fps, seed=args.seed)
    Path(args.report).write_text(report.to_text())
    if args.mpjs_csv:
        lines = ["frame,predicted_mm_per_frame,truth_mm_per_frame"]
        for i, (a, b) in enumerate(zip(report.mpjs_curve, report.truth_mpjs_curve), start=1):
            lines.append(f"{i},{a:.17g},{b:.17g}")
        Path(args.mpjs_csv).write_text("\n".join(lines) + "\n")
    for ms, v in report.mpjpe_at.items():
        print(f"mpjpe_ms_{ms} {v:.3f}  baseline {report.baseline_mpjpe_at[ms]:.3f}")


def cmd_synth(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seqs = synthetic_motions(args.kind, args.count, args.frames, args.seed, fps=args.fps)
    prefix = args.prefix or args.kind
    for i, seq in enumerate(seqs):
        save_motion_csv(seq, out / f"{prefix}_{i:04d}.csv")
    print(f"wrote {len(seqs)} {args.kind} sequences to {out}")


# ---------------------------------------------------------------------------
# Parser

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="motionsphere", description=__doc__, formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", help="motion CSV -> .srvf", formatter_class=fmt)
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--grid", type=int, default=None,
                   help="resample to this many samples first (default: frame count)")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help=".srvf -> motion CSV", formatter_class=fmt)
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--anchor", nargs=2, metavar=("MODE", "CSV"), default=None,
                   help="start pose from a CSV: MODE is last-prior or first-frame (default: stored anchor)")
    s.add_argument("--frames", type=int, default=None, help="output frame count (default: T_s)")
    s.add_argument("--fps", type=float, default=None,
                   help="fps written to the CSV (default: stored fps or 25)")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("mean", help="Karcher mean of .srvf files", formatter_class=fmt)
    s.add_argument("inputs", nargs="+")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--eps", type=float, default=0.9, help="step size")
    s.add_argument("--tau", type=float, default=1e-8, help="stop when |v_bar| < tau")
    s.add_argument("--max-iters", type=int, default=1000)
    s.set_defaults(func=cmd_mean)

    s = sub.add_parser("dist", help="geodesic distance of two .srvf files", formatter_class=fmt)
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("train", help="train from a JSON config", formatter_class=fmt)
    s.add_argument("config", nargs="?", default=None, help="JSON config file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key; training keys as train.<name> (JSON values)")
    s.add_argument("--epochs", type=int, default=None, help="shortcut for --set train.epochs=N")
    s.add_argument("--seed", type=int, default=None, help="shortcut for --set train.seed=N")
    s.add_argument("--checkpoint", default=None, help="output checkpoint path")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict future motion from a prior CSV", formatter_class=fmt)
    s.add_argument("checkpoint")
    s.add_argument("prior")
    s.add_argument("output")
    s.add_argument("--horizon", type=int, default=None,
                   help="frames per prediction (default: trained length)")
    s.add_argument("--recursive", type=int, default=1, help="chain this many predictions")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="evaluate a checkpoint on CSV files", formatter_class=fmt)
    s.add_argument("checkpoint")
    s.add_argument("dataset", help="directory of CSV files (all used as test data)")
    s.add_argument("report")
    s.add_argument("--predictor", choices=("model", "zero-velocity"), default="model")
    s.add_argument("--downsample", type=int, default=1)
    s.add_argument("--seed", type=int, default=0, help="seed of the 100x8 resampling protocol")
    s.add_argument("--mpjs-csv", default=None, help="also write the MPJS curves as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write synthetic motions as CSV", formatter_class=fmt)
    s.add_argument("kind", choices=SYNTH_KINDS)
    s.add_argument("count", type=int)
    s.add_argument("out_dir")
    s.add_argument("--frames", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fps", type=float, default=25.0)
    s.add_argument("--prefix", default=None, help="file name prefix (default: kind)")
    s.set_defaults(func=cmd_synth)
    return p


def _exit_code(exc):
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED
    if isinstance(exc, (ConvergenceError, DomainError)):
        return EXIT_NUMERIC
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    return EXIT_DATA


def main(argv=None):
    level = os.environ.get("MOTIONSPHERE_VERBOSITY", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (MotionSphereError, UsageError, ValueError, OSError) as exc:
        kind = type(exc).__name__
        print(f"motionsphere {args.command}: {kind}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
