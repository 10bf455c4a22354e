"""The four training losses and their weighted combination.

Everything here works on flat batches: a batch of sphere points or tangent
vectors is a ``(K, T_s * n)`` tensor laid out as in :class:`SphereGrid`.
"""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from ..geometry import log_map
from .networks import SphereGrid, generator_log_scale, _generator_tape


def cumulative_trapezoid_matrix(num_samples):
    """``C`` with ``(C @ f)[j] = integral of f from 0 to t_j`` on [0, 1]."""
    dt = 1.0 / (num_samples - 1)
    c = np.zeros((num_samples, num_samples))
    for j in range(1, num_samples):
        c[j, 0] += 0.5 * dt
        c[j, j] += 0.5 * dt
        c[j, 1:j] += dt
    return c


def decode_on_tape(points, scales, anchors, grid):
    """Differentiable SRVF decode of a batch; returns ``(K, T_s, n)`` curves.

    ``points`` are unit sphere points (flat), ``scales`` the per-sample SRVF
    norms and ``anchors`` the ``(K, n)`` start poses.
    """
    k = points.shape[0]
    q = points * np.asarray(scales, dtype=float).reshape(k, 1)
    q = q.reshape(k, grid.grid_size, grid.dim)
    speed = ad.sqrt(ad.sum_(q * q, axis=2, keepdims=True))
    vel = speed * q
    disp = ad.matmul(cumulative_trapezoid_matrix(grid.grid_size), vel)
    return disp + np.asarray(anchors, dtype=float).reshape(k, 1, grid.dim)


def gradient_penalty(critic, critic_params, interp):
    """Mean of ``(|grad_x D(x)| - 1)^2`` over the batch, kept differentiable."""

    def total_critic(x):
        return ad.sum_(critic.forward(x, critic_params))

    g = ad.input_gradient(total_critic, interp)
    norms = ad.sqrt(ad.sum_(g * g, axis=1))
    return ad.mean((norms - 1.0) * (norms - 1.0))


def interpolate_tangents(real_t, fake_t, alphas):
    alphas = np.asarray(alphas, dtype=float).reshape(-1, 1)
    return real_t * (1.0 - alphas) + fake_t * alphas


def adversarial_terms(critic, critic_params, real_t, fake_t, alphas, lam):
    """Returns ``(E D(real), E D(fake), penalty)`` as tensors."""
    d_real = ad.mean(critic.forward(real_t, critic_params))
    d_fake = ad.mean(critic.forward(fake_t, critic_params))
    interp = interpolate_tangents(real_t.data, fake_t.data, alphas)
    gp = gradient_penalty(critic, critic_params, interp) if lam != 0 else ad.Tensor(0.0)
    return d_real, d_fake, gp


def adversarial_loss(critic, real_future, predicted, lam, mu, alphas):
    """Wasserstein critic objective with gradient penalty, as a float.

    ``E[D(log q_T)] - E[D(log q_hat)] + lam * E[(|grad D(q~)| - 1)^2]`` where
    the expectations run over the batch and ``q~`` interpolates the two
    tangent batches with weights ``alphas``.
    """
    real_future = np.asarray(real_future, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if real_future.shape != predicted.shape:
        raise DimensionError("real and predicted batches differ in shape")
    real_t = np.stack([log_map(mu, q) for q in real_future]).reshape(len(real_future), -1)
    fake_t = np.stack([log_map(mu, q) for q in predicted]).reshape(len(predicted), -1)
    params = [ad.Tensor(p) for p in critic.params]
    d_real, d_fake, gp = adversarial_terms(
        critic, params, ad.Tensor(real_t), ad.Tensor(fake_t), alphas, lam
    )
    return float(d_real.data - d_fake.data + lam * gp.data)


def critic_objective(critic, critic_params, real_t, fake_t, alphas, lam):
    """Quantity the critic minimizes: ``E D(fake) - E D(real) + lam * GP``."""
    d_real, d_fake, gp = adversarial_terms(critic, critic_params, real_t, fake_t, alphas, lam)
    return d_fake - d_real + gp * lam


def reconstruction_loss(predicted_tangent, truth, mu):
    """L1 distance between ``log_mu(exp_mu(pred))`` and ``log_mu(truth)``.

    Works on one ``(T_s, n)`` sample or a batch (batch mean of per-sample sums).
    """
    pred = np.asarray(predicted_tangent, dtype=float)
    truth = np.asarray(truth, dtype=float)
    single = pred.ndim == 2
    if single:
        pred, truth = pred[None], truth[None]
    grid = SphereGrid(mu)
    with ad.no_grad():
        fake_t = grid.log_exp(ad.Tensor(grid.flatten(pred)))
    real_t = np.stack([log_map(mu, q) for q in truth]).reshape(len(truth), -1)
    return float(np.mean(np.sum(np.abs(fake_t.data - real_t), axis=1)))


def reconstruction_on_tape(fake_t, real_t):
    return ad.mean(ad.sum_(ad.abs_(fake_t - real_t), axis=1))


def skeleton_integrity_on_tape(pred_poses, true_poses):
    """Mean Gram distance between ``(M, k, 3)`` predicted and true poses."""
    true_poses = np.asarray(true_poses, dtype=float)
    tr_pred = ad.sum_(pred_poses * pred_poses, axis=(1, 2))
    tr_true = np.sum(true_poses * true_poses, axis=(1, 2))
    nuc = ad.nuclear_norm(ad.matmul(ad.swap_last(pred_poses), true_poses))
    return ad.mean(tr_pred + tr_true - nuc * 2.0)


def bone_length_on_tape(pred_poses, true_poses, incidence):
    """Mean absolute bone-length difference for ``(M, k, 3)`` pose batches."""
    true_len = np.linalg.norm(np.einsum("bk,mkc->mbc", incidence, true_poses), axis=-1)
    bones = ad.matmul(incidence, pred_poses)
    pred_len = ad.sqrt(ad.sum_(bones * bones, axis=2))
    return ad.mean(ad.abs_(pred_len - true_len))


@dataclass
class Batch:
    """Encoded training pairs, all arrays indexed by sample.

    prior_t / real_t: flat tangents at mu of prior and future SRVFs.
    future_scale / prior_scale: SRVF norms. anchors: ``(K, n)`` seam poses.
    truth: ``(K, F, k, 3)`` normalized future frames (seam excluded).
    """

    prior_t: np.ndarray
    real_t: np.ndarray
    future_scale: np.ndarray
    prior_scale: np.ndarray
    anchors: np.ndarray
    truth: np.ndarray

    def take(self, idx):
        return Batch(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))

    def __len__(self):
        return len(self.prior_t)


def generator_terms(
    gen, gen_params, critic, critic_params, batch, grid, incidence, cfg, pose_offset=None
):
    """Forward pass of the generator objective; returns dict of loss tensors.

    Keys: ``adv`` (``-E D(fake)``), ``rec``, ``skel``, ``bone`` and, for the
    regressed scale policy, ``scale``. Disabled terms are exactly zero.

    ``pose_offset`` is the ``(k, 3)`` root-centred mean pose in normalized
    units; adding it back turns normalized frames into actual skeletons so
    the Gram and bone-length terms see real limb geometry.
    """
    x = ad.Tensor(batch.prior_t)
    out = _generator_tape(gen, x, grid, gen_params)
    fake_t = grid.log_exp(out)
    zero = ad.Tensor(0.0)
    terms = {"adv": zero, "rec": zero, "skel": zero, "bone": zero}
    if cfg.use_adversarial:
        terms["adv"] = ad.scale(ad.mean(critic.forward(fake_t, critic_params)), -1.0)
    if cfg.use_reconstruction:
        terms["rec"] = reconstruction_on_tape(fake_t, ad.Tensor(batch.real_t))
    if cfg.use_skeleton or cfg.use_bone:
        q_hat = grid.exp(out)
        curves = decode_on_tape(q_hat, batch.future_scale, batch.anchors, grid)
        k, f = batch.truth.shape[:2]
        pred = curves[:, 1:, :].reshape(k * f, -1, 3)
        truth = batch.truth.reshape(k * f, -1, 3)
        if pose_offset is not None:
            pred = pred + pose_offset
            truth = truth + pose_offset
        if cfg.use_skeleton:
            terms["skel"] = skeleton_integrity_on_tape(pred, truth)
        if cfg.use_bone:
            terms["bone"] = bone_length_on_tape(pred, truth, incidence)
    if cfg.scale_policy == "regressed":
        log_ratio = generator_log_scale(gen, x, gen_params)
        target = np.log(batch.future_scale / batch.prior_scale)
        diff = log_ratio - target
        terms["scale"] = ad.mean(diff * diff)
    return terms


def weighted_total(terms, cfg):
    total = (
        terms["adv"] * cfg.beta1
        + terms["rec"] * cfg.beta2
        + terms["skel"] * cfg.beta3
        + terms["bone"] * cfg.beta4
    )
    if "scale" in terms:
        total = total + terms["scale"]
    return total


def global_loss(gen, critic, batch, grid, incidence, cfg, alphas, pose_offset=None):
    """Weighted sum of the adversarial, reconstruction, integrity and bone losses.

    The adversarial term is the full critic objective including the gradient
    penalty. Returns ``(total, breakdown)`` with floats; disabled terms
    contribute exactly 0.
    """
    with ad.no_grad():
        gp_params = [ad.Tensor(p) for p in critic.params]
        gen_params = [ad.Tensor(p) for p in gen.params]
        terms = generator_terms(
            gen, gen_params, critic, gp_params, batch, grid, incidence, cfg, pose_offset
        )
    breakdown = {
        "rec": float(terms["rec"].data),
        "skel": float(terms["skel"].data),
        "bone": float(terms["bone"].data),
    }
    if cfg.use_adversarial:
        with ad.no_grad():
            fake_t = grid.log_exp(_generator_tape(gen, ad.Tensor(batch.prior_t), grid, gen_params))
        crit_params = [ad.Tensor(p) for p in critic.params]
        d_real, d_fake, gp = adversarial_terms(
            critic, crit_params, ad.Tensor(batch.real_t), fake_t, alphas, cfg.gp_lambda
        )
        breakdown["adv"] = float(d_real.data - d_fake.data + cfg.gp_lambda * gp.data)
    else:
        breakdown["adv"] = 0.0
    weighted = {
        "adv": cfg.beta1 * breakdown["adv"],
        "rec": cfg.beta2 * breakdown["rec"],
        "skel": cfg.beta3 * breakdown["skel"],
        "bone": cfg.beta4 * breakdown["bone"],
    }
    total = weighted["adv"] + weighted["rec"] + weighted["skel"] + weighted["bone"]
    return total, weighted
