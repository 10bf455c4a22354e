"""Position and speed metrics, the zero-velocity baseline and bone-length drift."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .skeleton import bone_lengths
from .srvf import PoseSequence

HORIZONS_MS = (80, 160, 320, 400, 1000)


def _frames(seq):
    return seq.frames if isinstance(seq, PoseSequence) else np.asarray(seq, dtype=float)


def mpjpe(pred, truth, delta_frames, window=True):
    """Root-mean-square joint error over the first ``delta_frames`` frames.

    With ``window=False`` only frame ``delta_frames - 1`` is scored.
    """
    p, t = _frames(pred), _frames(truth)
    if p.shape != t.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {t.shape}")
    if not 1 <= delta_frames <= p.shape[0]:
        raise DimensionError(f"delta_frames={delta_frames} outside [1, {p.shape[0]}]")
    sl = slice(0, delta_frames) if window else slice(delta_frames - 1, delta_frames)
    sq = np.sum((p[sl] - t[sl]) ** 2, axis=-1)
    return float(np.sqrt(np.mean(sq)))


def mpjs(sequences):
    """Mean joint speed per frame: entry ``t - 1`` is the mean |p_{t-1} - p_t|."""
    frames = [_frames(s) for s in sequences]
    if not frames:
        raise DimensionError("mpjs needs at least one sequence")
    shape = frames[0].shape
    if shape[0] < 2:
        raise DimensionError("mpjs needs sequences of at least 2 frames")
    for f in frames:
        if f.shape != shape:
            raise DimensionError(f"shape mismatch: {f.shape} vs {shape}")
    stack = np.stack(frames)
    speed = np.linalg.norm(np.diff(stack, axis=1), axis=-1)
    return speed.mean(axis=(0, 2))


def zero_velocity_baseline(prior, horizon):
    f = _frames(prior)
    if f.shape[0] < 1:
        raise DimensionError("prior must have at least one frame")
    fps = prior.fps if isinstance(prior, PoseSequence) else 25.0
    return PoseSequence(np.repeat(f[-1:], horizon, axis=0), fps)


def bone_length_drift(seq, topo):
    """Largest (over frames) mean relative change of bone lengths from frame 0."""
    f = _frames(seq)
    lengths = np.array([bone_lengths(frame, topo) for frame in f])
    ref = lengths[0]
    rel = np.abs(lengths - ref) / ref
    return float(np.max(np.mean(rel, axis=1)))


def horizon_frames(ms, fps):
    return int(round(ms * fps / 1000.0))


@dataclass
class EvalReport:
    mpjpe_at: dict
    mpjs_curve: list
    baseline_mpjpe_at: dict
    sample_count: int
    truth_mpjs_curve: list = field(default_factory=list)
    resampled: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"sample_count": self.sample_count}
        for ms in HORIZONS_MS:
            out[f"mpjpe_ms_{ms}"] = self.mpjpe_at.get(ms)
            out[f"baseline_mpjpe_ms_{ms}"] = self.baseline_mpjpe_at.get(ms)
            rs = self.resampled.get(ms)
            out[f"resampled_mean_ms_{ms}"] = rs[0] if rs else None
            out[f"resampled_std_ms_{ms}"] = rs[1] if rs else None
        out["mpjs_curve"] = list(self.mpjs_curve)
        out["truth_mpjs_curve"] = list(self.truth_mpjs_curve)
        return out

    def to_text(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def resampled_mpjpe(per_sequence, draws=100, per_draw=8, seed=0):
    """Mean and std over ``draws`` means of ``per_draw`` randomly chosen sequences."""
    per_sequence = np.asarray(per_sequence, dtype=float)
    rng = np.random.default_rng(seed)
    size = min(per_draw, len(per_sequence))
    means = [per_sequence[rng.choice(len(per_sequence), size, replace=False)].mean() for _ in range(draws)]
    return float(np.mean(means)), float(np.std(means))


def build_report(preds, truths, priors, fps, horizons_ms=HORIZONS_MS, seed=0):
    """EvalReport for predicted futures against ground truth (both without seam frame)."""
    preds = [_frames(p) for p in preds]
    truths = [_frames(t) for t in truths]
    if len(preds) != len(truths) or len(priors) != len(truths):
        raise DimensionError("preds, truths and priors must have equal counts")
    length = truths[0].shape[0]
    baselines = [zero_velocity_baseline(p, length).frames for p in priors]
    mp, bl, rs = {}, {}, {}
    for ms in sorted(horizons_ms):
        d = horizon_frames(ms, fps)
        if not 1 <= d <= length:
            continue
        errs = [mpjpe(p, t, d) for p, t in zip(preds, truths)]
        mp[ms] = float(np.mean(errs))
        bl[ms] = float(np.mean([mpjpe(b, t, d) for b, t in zip(baselines, truths)]))
        rs[ms] = resampled_mpjpe(errs, seed=seed)
    seam = [np.concatenate([_frames(pr)[-1:], p]) for pr, p in zip(priors, preds)]
    seam_truth = [np.concatenate([_frames(pr)[-1:], t]) for pr, t in zip(priors, truths)]
    return EvalReport(
        mpjpe_at=mp,
        mpjs_curve=[float(v) for v in mpjs(seam)],
        baseline_mpjpe_at=bl,
        sample_count=len(preds),
        truth_mpjs_curve=[float(v) for v in mpjs(seam_truth)],
        resampled=rs,
    )
