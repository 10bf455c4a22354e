"""Manifold-aware Wasserstein GAN that predicts future motion on the SRVF sphere."""

from .checkpoint import Checkpoint
from .config import TrainConfig, preset
from .inference import evaluate, predict, predict_normalized, recursive_predict
from .losses import adversarial_loss, global_loss, reconstruction_loss
from .networks import MLP, SphereGrid, discriminator_forward, generator_forward
from .training import Adam, train

__all__ = [
    "Adam",
    "Checkpoint",
    "MLP",
    "SphereGrid",
    "TrainConfig",
    "adversarial_loss",
    "discriminator_forward",
    "evaluate",
    "generator_forward",
    "global_loss",
    "predict",
    "predict_normalized",
    "preset",
    "reconstruction_loss",
    "recursive_predict",
    "train",
]
