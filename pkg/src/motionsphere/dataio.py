"""Motion CSV files, preprocessing, slicing, SRVF pre-encoding and synthetic motions."""

import fnmatch
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError
from .skeleton import (
    NormalizationRecord,
    SkeletonTopology,
    apply_normalization,
    chain5_topology,
    fit_normalization,
)
from .srvf import PoseSequence, resample_curve, sequence_to_curve, srvf_encode

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a_64(data, h=FNV_OFFSET):
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


# ---------------------------------------------------------------------------
# CSV format

def save_motion_csv(seq, path):
    """Write ``# fps=<v>``, a ``joint_<j>_<axis>`` header and one row per frame."""
    k = seq.num_joints
    header = ",".join(f"joint_{j}_{ax}" for j in range(k) for ax in "xyz")
    lines = [f"# fps={seq.fps!r}", header]
    for frame in seq.frames.reshape(seq.num_frames, -1):
        lines.append(",".join(f"{v:.17g}" for v in frame))
    Path(path).write_text("\n".join(lines) + "\n")


def load_motion_csv(path):
    path = Path(path)
    fps = None
    header = None
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("fps="):
                try:
                    fps = float(body[4:])
                except ValueError:
                    raise ParseError(f"bad fps value {body[4:]!r}", path, lineno)
            continue
        if header is None:
            header = line.split(",")
            if len(header) % 3:
                raise ParseError("header column count is not a multiple of 3", path, lineno)
            for i, name in enumerate(header):
                expected = f"joint_{i // 3}_{'xyz'[i % 3]}"
                if name.strip() != expected:
                    raise ParseError(
                        f"header column {i} is {name!r}, expected {expected!r}", path, lineno
                    )
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(
                f"row has {len(parts)} values, header has {len(header)}", path, lineno
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError("non-numeric value in data row", path, lineno)
    if fps is None:
        raise ParseError("missing '# fps=<value>' comment line", path)
    if header is None:
        raise ParseError("missing header row 'joint_0_x,joint_0_y,joint_0_z,...'", path)
    if not rows:
        raise ParseError("file has no data rows", path)
    frames = np.array(rows).reshape(len(rows), -1, 3)
    try:
        return PoseSequence(frames, fps)
    except DimensionError as exc:
        raise ParseError(str(exc), path)


# ---------------------------------------------------------------------------
# Preprocessing

def downsample_fps(seq, factor):
    if factor < 1:
        raise ValueError("downsampling factor must be >= 1")
    return PoseSequence(seq.frames[::factor].copy(), seq.fps / factor)


def slice_nonoverlapping(seq, window):
    """Consecutive windows ``[0, w), [w, 2w), ...``; a short tail is dropped."""
    if window < 2:
        raise ValueError("window must be >= 2")
    n = seq.num_frames // window
    return [PoseSequence(seq.frames[i * window : (i + 1) * window].copy(), seq.fps) for i in range(n)]


@dataclass
class MotionDataset:
    """Normalized (prior, future) pairs that share topology, fps and lengths."""

    samples: list
    topology: SkeletonTopology
    fps: float
    normalization: NormalizationRecord
    split: str = "train"
    sources: list = field(default_factory=list)

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError("split must be 'train' or 'test'")
        shapes = {(p.frames.shape, f.frames.shape) for p, f in self.samples}
        if len(shapes) > 1:
            raise DimensionError(f"samples have inconsistent shapes: {sorted(shapes)}")

    def __len__(self):
        return len(self.samples)

    @property
    def prior_len(self):
        return self.samples[0][0].num_frames

    @property
    def future_len(self):
        return self.samples[0][1].num_frames


@dataclass
class DatasetManifest:
    files: list
    splits: dict
    prior_len: int
    future_len: int
    fps: float
    downsample: int
    norm_mean: list
    norm_value: float
    content_hash: str

    def to_text(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text):
        return cls(**json.loads(text))


def _as_named_sequences(items):
    """Accept paths or ``(name, PoseSequence)`` pairs; returns name-sorted triples."""
    out = []
    for item in items:
        if isinstance(item, (str, Path)):
            path = Path(item)
            raw = path.read_bytes()
            out.append((path.name, load_motion_csv(path), raw))
        else:
            name, seq = item
            buf = np.ascontiguousarray(seq.frames, dtype="<f8").tobytes()
            out.append((str(name), seq, buf))
    out.sort(key=lambda t: t[0])
    return out


def _resolve_split(split_rule, name):
    if callable(split_rule):
        split = split_rule(name)
    elif isinstance(split_rule, dict):
        split = split_rule.get(name, "train")
    elif isinstance(split_rule, str):
        split = "test" if fnmatch.fnmatch(name, split_rule) else "train"
    else:
        split = "train"
    if split not in ("train", "test"):
        raise ValueError(f"split rule returned {split!r} for {name}")
    return split


def make_dataset(
    files, topo=None, prior_len=10, future_len=10, split_rule=None, downsample=1, normalization=None
):
    """Build train/test datasets from motion files.

    Pipeline: downsample, normalize with statistics from the train split,
    slice into non-overlapping windows of ``prior_len + future_len`` frames
    and split each window into (prior, future). ``split_rule`` is a glob
    matched against file names for the test split, a name -> split dict or a
    callable. A given ``normalization`` record (e.g. from a checkpoint) is
    used as is and the train split may then be empty.
    Returns ``(train, test, manifest)``.
    """
    topo = topo or chain5_topology()
    named = _as_named_sequences(files)
    if not named:
        raise ValueError("no input files")
    ks = {seq.num_joints for _, seq, _ in named}
    if len(ks) != 1:
        raise DimensionError(f"inconsistent joint counts across files: {sorted(ks)}")
    if ks.pop() != topo.joint_count:
        raise DimensionError("joint count of the files does not match the topology")

    splits = {name: _resolve_split(split_rule, name) for name, _, _ in named}
    reduced = [(name, downsample_fps(seq, downsample)) for name, seq, _ in named]
    train_seqs = [seq for name, seq in reduced if splits[name] == "train"]
    if normalization is not None:
        record = normalization
    elif not train_seqs:
        raise ValueError("the train split is empty")
    else:
        record = fit_normalization(train_seqs, topo)

    window = prior_len + future_len
    buckets = {"train": [], "test": []}
    sources = {"train": [], "test": []}
    for name, seq in reduced:
        norm_seq = apply_normalization(seq, record)
        for i, win in enumerate(slice_nonoverlapping(norm_seq, window)):
            split = splits[name]
            buckets[split].append((win[:prior_len], win[prior_len:]))
            sources[split].append((name, i * window))
    if not buckets["train"] and not buckets["test"]:
        raise ValueError("no windows: sequences are shorter than prior+future")
    if not buckets["train"] and normalization is None:
        raise ValueError("no training windows: sequences are shorter than prior+future")

    h = FNV_OFFSET
    for _, _, raw in named:
        h = fnv1a_64(raw, h)
    fps = reduced[0][1].fps
    manifest = DatasetManifest(
        files=[name for name, _, _ in named],
        splits=splits,
        prior_len=prior_len,
        future_len=future_len,
        fps=fps,
        downsample=downsample,
        norm_mean=record.mean.tolist(),
        norm_value=record.norm,
        content_hash=f"{h:016x}",
    )
    train = MotionDataset(buckets["train"], topo, fps, record, "train", sources["train"])
    test = MotionDataset(buckets["test"], topo, fps, record, "test", sources["test"])
    return train, test, manifest


# ---------------------------------------------------------------------------
# SRVF pre-encoding

@dataclass
class EncodedDataset:
    """SRVF encodings of every pair in a dataset.

    Futures are encoded as the curve ``[P_tau, P_tau+1, ..., P_T]`` so that the
    seam pose is the curve's start; priors are resampled onto the same grid.
    """

    prior_points: np.ndarray
    prior_scales: np.ndarray
    future_points: np.ndarray
    future_scales: np.ndarray
    anchors: np.ndarray
    truth: np.ndarray

    @property
    def grid_size(self):
        return self.future_points.shape[1]

    def __len__(self):
        return len(self.prior_points)


def encode_prior(prior_frames, grid_size):
    curve = sequence_to_curve(prior_frames)
    if curve.shape[0] != grid_size:
        curve = resample_curve(curve, grid_size)
    return srvf_encode(curve, anchor=curve[-1])


def encode_future(last_prior, future_frames):
    curve = np.concatenate([last_prior.reshape(1, -1), sequence_to_curve(future_frames)], axis=0)
    return srvf_encode(curve, anchor=curve[0])


def _dataset_key(dataset):
    h = hashlib.sha256()
    for p, f in dataset.samples:
        h.update(np.ascontiguousarray(p.frames, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(f.frames, dtype="<f8").tobytes())
    return h.hexdigest()[:32]


def encode_dataset(dataset, cache_dir=None):
    """Encode every pair; with ``cache_dir`` results are stored as ``.npz`` by content."""
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"srvf_{_dataset_key(dataset)}.npz"
        if cache_path.exists():
            with np.load(cache_path) as z:
                return EncodedDataset(**{k: z[k] for k in z.files})
    grid = dataset.future_len + 1
    pp, ps, fp, fs, anchors, truth = [], [], [], [], [], []
    for prior, future in dataset.samples:
        enc_p = encode_prior(prior.frames, grid)
        last = prior.frames[-1].reshape(-1)
        enc_f = encode_future(last, future.frames)
        pp.append(enc_p.point)
        ps.append(enc_p.scale)
        fp.append(enc_f.point)
        fs.append(enc_f.scale)
        anchors.append(last)
        truth.append(future.frames)
    enc = EncodedDataset(
        np.array(pp), np.array(ps), np.array(fp), np.array(fs), np.array(anchors), np.array(truth)
    )
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache_path, **enc.__dict__)
    return enc


# ---------------------------------------------------------------------------
# Synthetic motions

SYNTH_KINDS = ("pendulum_walk", "figure8", "two_mode")

_SPINE = np.array([0.0, 0.0, 500.0])
_ARM = np.array([120.0, 60.0, -560.0])
_THIGH = np.array([90.0, 40.0, -440.0])
_SHIN = np.array([0.0, -90.0, -430.0])
_ARM_AXIS = np.array([1.0, 0.0, 0.6]) / np.linalg.norm([1.0, 0.0, 0.6])
_LEG_AXIS = np.array([1.0, 0.0, 0.0])


def _rotate(v, axis, angle):
    """Rodrigues rotation of row vectors ``v`` (T, 3) about a unit ``axis``."""
    c = np.cos(angle)[:, None]
    s = np.sin(angle)[:, None]
    return v * c + np.cross(axis, v) * s + axis[None, :] * (v @ axis)[:, None] * (1.0 - c)


def chain5_pose(leg_angle, arm_angle, arm_lift=0.0):
    """Joint positions of the five-joint chain for arrays of angles.

    The leg (knee and foot) swings rigidly about the pelvis on the x axis and
    the arm swings rigidly about the neck on a tilted axis, so bone lengths
    are constant by construction.
    """
    leg_angle = np.atleast_1d(np.asarray(leg_angle, dtype=float))
    arm_angle = np.broadcast_to(np.asarray(arm_angle, dtype=float), leg_angle.shape)
    arm_lift = np.broadcast_to(np.asarray(arm_lift, dtype=float), leg_angle.shape)
    t = leg_angle.size
    pelvis = np.zeros((t, 3))
    neck = pelvis + _SPINE
    arm = _rotate(np.broadcast_to(_ARM, (t, 3)), _ARM_AXIS, arm_angle)
    arm = _rotate(arm, np.array([0.0, 1.0, 0.0]), arm_lift)
    hand = neck + arm
    knee = pelvis + _rotate(np.broadcast_to(_THIGH, (t, 3)), _LEG_AXIS, leg_angle)
    foot = knee + _rotate(np.broadcast_to(_SHIN, (t, 3)), _LEG_AXIS, leg_angle)
    return np.stack([pelvis, neck, hand, knee, foot], axis=1)


@dataclass(frozen=True)
class SynthParams:
    kind: str
    frequency: float
    phase: float
    amplitude: float
    onset: float


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def synth_angles(p, t):
    """Leg angle, arm angle and arm lift at times ``t`` (seconds)."""
    w = 2.0 * np.pi * p.frequency
    if p.kind == "pendulum_walk":
        leg = p.amplitude * np.sin(w * t + p.phase)
        return leg, -leg, np.zeros_like(t)
    if p.kind == "figure8":
        leg = p.amplitude * np.sin(w * t + p.phase)
        arm = 0.6 * p.amplitude * np.sin(2.0 * (w * t + p.phase))
        lift = 0.5 * p.amplitude * np.sin(w * t + p.phase)
        return leg, arm, lift
    if p.kind == "two_mode":
        # Walk, then stop and reach: the leg swing fades out while the arm lifts.
        blend = _smoothstep((t - p.onset) / 1.0)
        leg = (1.0 - blend) * p.amplitude * np.sin(w * t + p.phase)
        lift = 1.2 * blend
        return leg, -0.5 * leg, lift
    raise ValueError(f"unknown synthetic kind {p.kind!r}; choose from {SYNTH_KINDS}")


def synth_params(kind, count, frames, seed, fps=25.0, base_frequency=1.0, amplitude=0.5):
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")
    rng = np.random.default_rng(seed)
    duration = frames / fps
    out = []
    for _ in range(count):
        freq = base_frequency * (1.0 + rng.uniform(-0.1, 0.1))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        onset = rng.uniform(0.2, 0.6) * duration
        out.append(SynthParams(kind, freq, phase, amplitude, onset))
    return out


def synthetic_motions(kind, count, frames, seed, fps=25.0):
    """Deterministic articulated motions on the five-joint chain (millimeters)."""
    if count < 1 or frames < 1:
        raise ValueError("count and frames must be >= 1")
    t = np.arange(frames) / fps
    seqs = []
    for p in synth_params(kind, count, frames, seed, fps):
        leg, arm, lift = synth_angles(p, t)
        seqs.append(PoseSequence(chain5_pose(leg, arm, lift), fps))
    return seqs
