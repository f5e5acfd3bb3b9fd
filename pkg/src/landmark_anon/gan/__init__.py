"""Landmark-to-face re-synthesis network."""

from .checkpoint import FORMAT_VERSION, GanCheckpoint
from .config import GanConfig, patch_map_size
from .core import (
    Synthesizer,
    TrainLog,
    TrainLogRecord,
    anonymize,
    discriminator_forward,
    face_tensor,
    generator_forward,
    mean_l1,
    raster_tensor,
    stack_pairs,
    train,
)
from .losses import gan_losses
from .models import PatchDiscriminator, UNetGenerator, build_models

__all__ = [
    "FORMAT_VERSION",
    "GanCheckpoint",
    "GanConfig",
    "PatchDiscriminator",
    "Synthesizer",
    "TrainLog",
    "TrainLogRecord",
    "UNetGenerator",
    "anonymize",
    "build_models",
    "discriminator_forward",
    "face_tensor",
    "gan_losses",
    "generator_forward",
    "mean_l1",
    "patch_map_size",
    "raster_tensor",
    "stack_pairs",
    "train",
]
