"""Pose sequences, curves in R^n and their square-root velocity functions."""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateInputError, DimensionError
from .geometry import l2_norm

ZERO_SPEED_EPS = 1e-12


@dataclass
class PoseSequence:
    """``frames`` is a ``(T, k, 3)`` array of joint positions in millimeters."""

    frames: np.ndarray
    fps: float = 25.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise DimensionError(f"frames must have shape (T, k, 3), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise DimensionError("a pose sequence needs at least one frame")
        if not np.all(np.isfinite(self.frames)):
            raise DimensionError("pose sequence contains non-finite values")
        if not self.fps > 0:
            raise DimensionError(f"fps must be positive, got {self.fps}")

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def num_joints(self):
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return PoseSequence(self.frames[idx], self.fps)
        return self.frames[idx]


@dataclass
class ScaledSrvf:
    """A unit SRVF point plus what is needed to rebuild the original curve.

    ``scale`` is the L2 norm of the raw SRVF before normalization (its square
    is the curve's length) and ``anchor`` is the curve value at t = 0.
    """

    point: np.ndarray
    scale: float
    anchor: np.ndarray = field(default=None)

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        if self.anchor is None:
            self.anchor = np.zeros(self.point.shape[1])
        self.anchor = np.asarray(self.anchor, dtype=float)
        if not self.scale > 0:
            raise DegenerateInputError(f"SRVF scale must be positive, got {self.scale}")
        if self.anchor.shape != (self.point.shape[1],):
            raise DimensionError(
                f"anchor has shape {self.anchor.shape}, expected ({self.point.shape[1]},)"
            )


def sequence_to_curve(seq):
    """Flatten poses joint-major: row t is (x_1, y_1, z_1, ..., x_k, y_k, z_k)."""
    frames = seq.frames if isinstance(seq, PoseSequence) else np.asarray(seq, dtype=float)
    return frames.reshape(frames.shape[0], -1).copy()


def curve_to_sequence(curve, fps=25.0):
    curve = np.asarray(curve, dtype=float)
    if curve.shape[1] % 3:
        raise DimensionError(f"curve dimension {curve.shape[1]} is not a multiple of 3")
    return PoseSequence(curve.reshape(curve.shape[0], -1, 3).copy(), fps)


def curve_derivative(curve):
    """d(curve)/dt on the uniform grid of [0, 1], second order everywhere."""
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[0] < 3:
        raise DimensionError(f"need a (T, n) curve with T >= 3, got shape {curve.shape}")
    dt = 1.0 / (curve.shape[0] - 1)
    return np.gradient(curve, dt, axis=0, edge_order=2)


def resample_curve(curve, t_out):
    """Linear interpolation onto ``t_out`` uniform samples; endpoints kept exactly."""
    curve = np.asarray(curve, dtype=float)
    t_in = curve.shape[0]
    if t_in < 2 or t_out < 2:
        raise DimensionError("resampling needs at least 2 input and 2 output samples")
    if t_out == t_in:
        return curve.copy()
    src = np.linspace(0.0, 1.0, t_in)
    dst = np.linspace(0.0, 1.0, t_out)
    out = np.empty((t_out, curve.shape[1]))
    for j in range(curve.shape[1]):
        out[:, j] = np.interp(dst, src, curve[:, j])
    out[0] = curve[0]
    out[-1] = curve[-1]
    return out


def raw_srvf(curve):
    """Unnormalized SRVF samples ``q = a' / sqrt(|a'|)`` (zero where a' = 0)."""
    vel = curve_derivative(curve)
    speed = np.linalg.norm(vel, axis=1)
    q = np.zeros_like(vel)
    moving = speed > ZERO_SPEED_EPS
    q[moving] = vel[moving] / np.sqrt(speed[moving])[:, None]
    return q


def srvf_encode(curve, anchor=None):
    """Map a curve to a unit SRVF point, keeping its scale and an anchor pose.

    The anchor defaults to the first sample of the curve. Priors are encoded
    with ``anchor=curve[-1]`` so that a decoded prediction starts where the
    prior ends.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[0] < 3:
        raise DimensionError(f"SRVF encoding needs T >= 3 samples, got shape {curve.shape}")
    q = raw_srvf(curve)
    scale = l2_norm(q)
    if scale < ZERO_SPEED_EPS:
        raise DegenerateInputError("curve is constant: its SRVF is zero and has no direction")
    if anchor is None:
        anchor = curve[0]
    return ScaledSrvf(q / scale, scale, np.array(anchor, dtype=float))


def srvf_decode(s, t_out=None):
    """Integrate ``|q|q`` from the anchor; row 0 of the result is the anchor."""
    q = s.scale * s.point
    t_s = q.shape[0]
    vel = np.linalg.norm(q, axis=1)[:, None] * q
    disp = cumulative_trapezoid(vel, dx=1.0 / (t_s - 1), axis=0, initial=0.0)
    curve = s.anchor[None, :] + disp
    if t_out is not None and t_out != t_s:
        curve = resample_curve(curve, t_out)
    curve[0] = s.anchor
    return curve
