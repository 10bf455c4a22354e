"""Adversarial training loop: one critic update, then one generator update, per batch."""

import logging

import numpy as np

from .. import autodiff as ad
from ..dataio import encode_dataset
from ..errors import TrainingDivergedError
from ..geometry import KarcherConfig, karcher_mean, log_map
from .checkpoint import Checkpoint
from .config import TrainConfig
from .losses import Batch, critic_objective, generator_terms, weighted_total
from .networks import SphereGrid, critic_network, generator_network, _generator_tape

log = logging.getLogger(__name__)


class Adam:
    """Adam on a list of numpy arrays, updated in place."""

    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def reference_point(enc, cfg):
    """Karcher mean of the SRVFs selected by ``cfg.mu_source``."""
    if cfg.mu_source == "priors":
        pts = list(enc.prior_points)
    elif cfg.mu_source == "futures":
        pts = list(enc.future_points)
    else:
        pts = list(enc.prior_points) + list(enc.future_points)
    kc = KarcherConfig(threshold=cfg.karcher_threshold, max_iters=cfg.karcher_max_iters)
    return karcher_mean(pts, kc)


def tangent_batch(enc, mu):
    """Log-map every encoded prior and future at ``mu`` into a :class:`Batch`."""
    prior_t = np.stack([log_map(mu, q).reshape(-1) for q in enc.prior_points])
    real_t = np.stack([log_map(mu, q).reshape(-1) for q in enc.future_points])
    return Batch(prior_t, real_t, enc.future_scales, enc.prior_scales, enc.anchors, enc.truth)


def pose_offset(record):
    """Root-centred mean pose divided by the norm: normalized frame + offset = skeleton."""
    m = record.mean - record.mean[record.root_index]
    return m / record.norm


def _check_finite(values, epoch):
    for name, v in values.items():
        if not np.isfinite(v):
            raise TrainingDivergedError(f"non-finite {name} loss ({v})", epoch)


def _check_grads(grads, epoch, who):
    for g in grads:
        if not np.all(np.isfinite(g.data)):
            raise TrainingDivergedError(f"non-finite {who} gradient", epoch)


def train(train_ds, config=None, test_ds=None, encoded=None, callback=None):
    """Fit generator and critic on ``train_ds``; returns ``(checkpoint, epoch_logs)``.

    Each log entry has the mean losses of the epoch and, when ``test_ds`` is
    given, the held-out MPJPE (mm) over the full predicted horizon. The first
    entry (epoch 0) records the Karcher iteration count and final norm.
    """
    cfg = config or TrainConfig()
    enc = encoded if encoded is not None else encode_dataset(train_ds)
    km = reference_point(enc, cfg)
    mu = km.mean
    grid = SphereGrid(mu)
    data = tangent_batch(enc, mu)
    incidence = train_ds.topology.incidence()
    offset = pose_offset(train_ds.normalization)
    n_flat = grid.flat_size

    rng = np.random.default_rng(cfg.seed)
    extra = 1 if cfg.scale_policy == "regressed" else 0
    gen = generator_network(n_flat, n_flat + extra, cfg, rng)
    critic = critic_network(n_flat, cfg, rng)
    adam_kw = dict(b1=cfg.adam_b1, b2=cfg.adam_b2, eps=cfg.adam_eps)
    opt_g = Adam(gen.params, cfg.lr, **adam_kw)
    opt_c = Adam(critic.params, cfg.lr, **adam_kw)

    ratio = enc.future_scales / enc.prior_scales
    scale_stats = {
        "prior_ratio": float(np.mean(ratio)),
        "train_mean": float(np.mean(enc.future_scales)),
    }
    ckpt = Checkpoint(
        generator=gen,
        critic=critic,
        config=cfg,
        mu=mu,
        normalization=train_ds.normalization,
        topology=train_ds.topology,
        prior_len=train_ds.prior_len,
        future_len=train_ds.future_len,
        fps=train_ds.fps,
        scale_stats=scale_stats,
    )
    logs = [{"epoch": 0, "karcher_iterations": km.iterations, "karcher_norm": km.final_norm}]

    test_enc = encode_dataset(test_ds) if test_ds is not None and len(test_ds) else None
    m = len(data)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(m)
        sums = {"critic": 0.0, "adv": 0.0, "rec": 0.0, "skel": 0.0, "bone": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, m, cfg.batch):
            batch = data.take(perm[start : start + cfg.batch])
            alphas = rng.uniform(0.0, 1.0, size=len(batch))

            if cfg.use_adversarial:
                with ad.no_grad():
                    fake_t = grid.log_exp(_generator_tape(gen, ad.Tensor(batch.prior_t), grid, None))
                c_params = critic.tensors()
                c_loss = critic_objective(
                    critic, c_params, ad.Tensor(batch.real_t), fake_t, alphas, cfg.gp_lambda
                )
                c_grads = ad.grad(c_loss, c_params)
                _check_finite({"critic": c_loss.item()}, epoch)
                _check_grads(c_grads, epoch, "critic")
                opt_c.step([g.data for g in c_grads])
                sums["critic"] += c_loss.item()

            g_params = gen.tensors()
            c_const = [ad.Tensor(p) for p in critic.params]
            terms = generator_terms(
                gen, g_params, critic, c_const, batch, grid, incidence, cfg, offset
            )
            total = weighted_total(terms, cfg)
            values = {k: float(v.data) for k, v in terms.items()}
            values["total"] = total.item()
            _check_finite(values, epoch)
            g_grads = ad.grad(total, g_params)
            _check_grads(g_grads, epoch, "generator")
            opt_g.step([g.data for g in g_grads])
            for k in ("adv", "rec", "skel", "bone", "total"):
                sums[k] += values[k]
            n_batches += 1

        entry = {"epoch": epoch}
        entry.update({k: v / n_batches for k, v in sums.items()})
        if test_enc is not None:
            from .inference import encoded_mpjpe

            entry["val_mpjpe"] = encoded_mpjpe(ckpt, test_enc)
        logs.append(entry)
        if callback is not None:
            callback(entry)
        log.debug("epoch %d: %s", epoch, entry)
    return ckpt, logs
