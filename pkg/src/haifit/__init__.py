"""Sketch-to-image translation: a progressively grown pyramid GAN with a
multi-scale feature-fusion encoder, training/eval tooling, and an HTTP service."""

from .core import (Checkpoint, FeatureMap, ResolutionSchedule, TrainConfig,
                   denormalize_image, downsample_pyramid, make_schedule, normalize_image)

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "FeatureMap", "ResolutionSchedule", "TrainConfig",
    "denormalize_image", "downsample_pyramid", "make_schedule", "normalize_image",
    "__version__",
]
