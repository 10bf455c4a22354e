"""Riemannian operations on the unit hypersphere of discretized SRVFs.

A point is a ``(T_s, n)`` array sampling ``q: [0, 1] -> R^n`` on a uniform
grid. All inner products use the trapezoidal rule on that grid, so norms,
distances and maps are consistent with each other everywhere.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, DomainError

ANTIPODE_EPS = 1e-6
ZERO_NORM_EPS = 1e-12


def trapezoid_weights(num_samples):
    """Quadrature weights of the trapezoidal rule on a uniform grid of [0, 1]."""
    if num_samples < 2:
        raise DimensionError(f"need at least 2 samples, got {num_samples}")
    dt = 1.0 / (num_samples - 1)
    w = np.full(num_samples, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise DimensionError(f"expected a (T_s, n) array, got shape {a.shape}")
    return a, b


def l2_inner(a, b):
    """L2 inner product of two sampled functions on [0, 1]."""
    a, b = _check_pair(a, b)
    w = trapezoid_weights(a.shape[0])
    return float(w @ np.sum(a * b, axis=1))


def l2_norm(a):
    return float(np.sqrt(max(l2_inner(a, a), 0.0)))


def project_to_sphere(q):
    """Rescale ``q`` to unit L2 norm."""
    nrm = l2_norm(q)
    if nrm < ZERO_NORM_EPS:
        raise DomainError("cannot project a zero function onto the sphere")
    return np.asarray(q, dtype=float) / nrm


def project_to_tangent(mu, v):
    """Remove the ``mu`` component of ``v`` so that it is tangent at ``mu``."""
    return np.asarray(v, dtype=float) - l2_inner(v, mu) * mu


def geodesic_distance(q1, q2):
    """Arc length between two unit points, in ``[0, pi]``."""
    c = np.clip(l2_inner(q1, q2), -1.0, 1.0)
    return float(np.arccos(c))


def exp_map(mu, s):
    mu, s = _check_pair(mu, s)
    r = l2_norm(s)
    if r < ZERO_NORM_EPS:
        return mu.copy()
    return np.cos(r) * mu + np.sin(r) * (s / r)


def log_map(mu, q):
    """Inverse of :func:`exp_map`; undefined at the antipode of ``mu``."""
    mu, q = _check_pair(mu, q)
    c = l2_inner(q, mu)
    perp = q - c * mu
    # atan2 keeps the angle accurate near 0 where arccos loses half the digits.
    d = float(np.arctan2(l2_norm(perp), c))
    if d >= np.pi - ANTIPODE_EPS:
        raise DomainError(f"log map undefined: point is antipodal to the base (d={d:.9f})")
    if d < ZERO_NORM_EPS:
        return np.zeros_like(mu)
    v = (d / l2_norm(perp)) * perp
    # Re-project: removes the rounding residue along mu.
    return project_to_tangent(mu, v)


def geodesic_interpolate(q1, q2, a):
    """Point at fraction ``a`` along the minimizing great circle from q1 to q2."""
    q1, q2 = _check_pair(q1, q2)
    if a == 0:
        return q1.copy()
    if a == 1:
        return q2.copy()
    d = geodesic_distance(q1, q2)
    if d >= np.pi - ANTIPODE_EPS:
        raise DomainError("geodesic between antipodal points is not unique")
    if d < ZERO_NORM_EPS:
        return q1.copy()
    return (np.sin((1.0 - a) * d) * q1 + np.sin(a * d) * q2) / np.sin(d)


def _mean_log(mu, stack, w):
    """Average of ``log_map(mu, q)`` over a stacked batch of points."""
    cos_d = np.einsum("t,itn,tn->i", w, stack, mu)
    perp = stack - cos_d[:, None, None] * mu
    sin_d = np.sqrt(np.maximum(np.einsum("t,itn,itn->i", w, perp, perp), 0.0))
    d = np.arctan2(sin_d, cos_d)
    if np.any(d >= np.pi - ANTIPODE_EPS):
        raise DomainError("log map undefined: a point is antipodal to the running mean")
    coef = np.where(d < ZERO_NORM_EPS, 0.0, d / np.where(d < ZERO_NORM_EPS, 1.0, sin_d))
    v = coef[:, None, None] * perp
    return project_to_tangent(mu, v.mean(axis=0))


@dataclass(frozen=True)
class KarcherConfig:
    """Step size, stopping threshold and iteration cap of the Karcher iteration."""

    epsilon: float = 0.9
    threshold: float = 1e-8
    max_iters: int = 1000

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class KarcherResult:
    mean: np.ndarray
    iterations: int
    final_norm: float


def karcher_mean(points, cfg=None):
    """Intrinsic mean of points on the sphere by iterative tangent averaging.

    Starts from the first point, averages the log-mapped points at the
    current estimate and moves along that direction by ``cfg.epsilon`` until
    the average direction has norm below ``cfg.threshold``.

    Returns a :class:`KarcherResult` with the mean, the number of averaging
    steps taken and the norm of the last average direction.
    """
    cfg = cfg or KarcherConfig()
    pts = [np.asarray(p, dtype=float) for p in points]
    if not pts:
        raise ValueError("karcher_mean needs at least one point")
    shape = pts[0].shape
    for p in pts:
        if p.shape != shape:
            raise DimensionError(f"shape mismatch: {p.shape} vs {shape}")

    stack = np.stack(pts)
    w = trapezoid_weights(shape[0])
    mu = pts[0].copy()
    vbar_norm = np.inf
    for it in range(1, cfg.max_iters + 1):
        vbar = _mean_log(mu, stack, w)
        vbar_norm = l2_norm(vbar)
        if vbar_norm < cfg.threshold:
            return KarcherResult(mu, it, vbar_norm)
        mu = exp_map(mu, cfg.epsilon * vbar)
        mu = project_to_sphere(mu)
    raise ConvergenceError(
        f"Karcher mean did not converge in {cfg.max_iters} iterations "
        f"(last |v|={vbar_norm:.3e}, threshold {cfg.threshold:.3e})",
        last_norm=vbar_norm,
        iterations=cfg.max_iters,
    )
