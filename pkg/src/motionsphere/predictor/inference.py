"""Prediction stage, recursive generation and checkpoint evaluation."""

import numpy as np

from .. import autodiff as ad
from ..dataio import encode_dataset, encode_prior
from ..errors import DimensionError
from ..geometry import exp_map, log_map, project_to_sphere
from ..metrics import build_report, mpjpe
from ..skeleton import apply_normalization
from ..srvf import PoseSequence, ScaledSrvf, srvf_decode
from .networks import SphereGrid, generator_forward


def predicted_scale(ckpt, prior_scale, prior_tangent_flat=None):
    policy = ckpt.config.scale_policy
    if policy == "prior_ratio":
        return prior_scale * ckpt.scale_stats["prior_ratio"]
    if policy == "train_mean":
        return ckpt.scale_stats["train_mean"]
    with ad.no_grad():
        head = ckpt.generator.forward(prior_tangent_flat.reshape(1, -1)).data[0, -1]
    return prior_scale * float(np.exp(head))


def predict_point(ckpt, prior_point):
    """``exp_mu(G(log_mu(q_prior)))`` as a unit point, plus the prior tangent."""
    mu = ckpt.mu
    tangent = log_map(mu, prior_point)
    out = generator_forward(ckpt.generator, tangent, SphereGrid(mu))
    return project_to_sphere(exp_map(mu, out)), tangent


def predict_normalized(ckpt, prior_frames, horizon=None):
    """Predict from normalized prior frames; returns ``horizon + 1`` normalized frames.

    Frame 0 is the last prior frame (the seam), frames 1.. the prediction.
    """
    horizon = horizon or ckpt.future_len
    prior_frames = np.asarray(prior_frames, dtype=float)
    enc = encode_prior(prior_frames, ckpt.grid_size)
    q_hat, tangent = predict_point(ckpt, enc.point)
    scale = predicted_scale(ckpt, enc.scale, tangent)
    anchor = prior_frames[-1].reshape(-1)
    curve = srvf_decode(ScaledSrvf(q_hat, scale, anchor), horizon + 1)
    return curve.reshape(horizon + 1, -1, 3)


def _check_prior(ckpt, prior):
    if prior.num_frames != ckpt.prior_len:
        raise DimensionError(f"prior has {prior.num_frames} frames, model expects {ckpt.prior_len}")
    if prior.num_joints != ckpt.joint_count:
        raise DimensionError(f"prior has {prior.num_joints} joints, model expects {ckpt.joint_count}")


def predict(ckpt, prior, horizon_frames=None):
    """Predict future motion (mm) from a raw prior sequence.

    Returns ``horizon_frames + 1`` frames: frame 0 is the last prior frame,
    copied exactly, followed by the predicted frames.
    """
    _check_prior(ckpt, prior)
    horizon = horizon_frames or ckpt.future_len
    if horizon < 1:
        raise ValueError("horizon_frames must be positive")
    norm_prior = apply_normalization(prior, ckpt.normalization)
    pred = predict_normalized(ckpt, norm_prior.frames, horizon)
    disp = (pred - pred[0]) * ckpt.normalization.norm
    out = prior.frames[-1][None] + disp
    out[0] = prior.frames[-1]
    return PoseSequence(out, prior.fps)


def recursive_predict(ckpt, prior, repetitions, horizon_frames=None, return_segments=False):
    """Chain ``repetitions`` predictions, each seeded by the tail of the previous one.

    The result starts with the seam frame and has ``repetitions * horizon``
    predicted frames after it. Segments (each starting with its seam frame)
    are returned too when ``return_segments`` is set.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    horizon = horizon_frames or ckpt.future_len
    if ckpt.prior_len > horizon:
        raise DimensionError("recursion needs prior_len <= horizon")
    segments = []
    current = prior
    for _ in range(repetitions):
        seg = predict(ckpt, current, horizon)
        segments.append(seg)
        current = PoseSequence(seg.frames[-ckpt.prior_len :], prior.fps)
    frames = np.concatenate([segments[0].frames] + [s.frames[1:] for s in segments[1:]])
    result = PoseSequence(frames, prior.fps)
    return (result, segments) if return_segments else result


def predict_encoded(ckpt, enc):
    """Vectorized prediction for an encoded dataset; ``(K, F + 1, k, 3)`` normalized."""
    grid = SphereGrid(ckpt.mu)
    tangents = np.stack([log_map(ckpt.mu, q) for q in enc.prior_points])
    outs = generator_forward(ckpt.generator, tangents, grid)
    horizon = enc.truth.shape[1]
    preds = []
    for i, out in enumerate(outs):
        q_hat = project_to_sphere(exp_map(ckpt.mu, out))
        scale = predicted_scale(ckpt, enc.prior_scales[i], tangents[i])
        curve = srvf_decode(ScaledSrvf(q_hat, scale, enc.anchors[i]), horizon + 1)
        preds.append(curve.reshape(horizon + 1, -1, 3))
    return np.stack(preds)


def encoded_mpjpe(ckpt, enc):
    """Mean held-out MPJPE (mm) over the full predicted horizon."""
    preds = predict_encoded(ckpt, enc)[:, 1:]
    f = enc.truth.shape[1]
    errs = [mpjpe(p, t, f) for p, t in zip(preds, enc.truth)]
    return float(np.mean(errs)) * ckpt.normalization.norm


def evaluate(ckpt, dataset, seed=0):
    """EvalReport (mm) of a checkpoint on normalized test pairs."""
    enc = encode_dataset(dataset)
    preds = predict_encoded(ckpt, enc)[:, 1:]
    rec = ckpt.normalization
    priors = [rec.invert(p.frames) for p, _ in dataset.samples]
    truths = [rec.invert(t) for t in enc.truth]
    preds = [rec.invert(p) for p in preds]
    return build_report(preds, truths, priors, dataset.fps, seed=seed)
