"""Skeleton motion as points on the SRVF hypersphere, and a GAN that predicts it."""

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    MotionSphereError,
    ParseError,
    TrainingDivergedError,
)
from .geometry import (
    KarcherConfig,
    exp_map,
    geodesic_distance,
    geodesic_interpolate,
    karcher_mean,
    l2_inner,
    log_map,
)
from .srvf import PoseSequence, ScaledSrvf, srvf_decode, srvf_encode

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DegenerateInputError",
    "DimensionError",
    "DomainError",
    "KarcherConfig",
    "MotionSphereError",
    "ParseError",
    "PoseSequence",
    "ScaledSrvf",
    "TrainingDivergedError",
    "exp_map",
    "geodesic_distance",
    "geodesic_interpolate",
    "karcher_mean",
    "l2_inner",
    "log_map",
    "srvf_decode",
    "srvf_encode",
]
