from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from ..errors import InvalidArgumentError

# below this the patch discriminator's output map would be empty
MIN_IMAGE_SIZE = 32


@dataclass(frozen=True)
class GanConfig:
    image_size: int = 512
    base_channels: int = 64
    lambda_l1: float = 100.0
    epochs: int = 25
    batch_size: int = 32
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0

    def __post_init__(self):
        s = self.image_size
        if s < MIN_IMAGE_SIZE or s & (s - 1):
            raise InvalidArgumentError(
                f"image_size must be a power of two >= {MIN_IMAGE_SIZE}, got {s}"
            )
        if self.base_channels < 1:
            raise InvalidArgumentError("base_channels must be positive")
        if self.lambda_l1 < 0:
            raise InvalidArgumentError("lambda_l1 must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidArgumentError("epochs and batch_size must be positive")
        if self.lr <= 0 or not (0 < self.beta1 < 1) or not (0 < self.beta2 < 1):
            raise InvalidArgumentError("learning rate and Adam betas must be positive (betas < 1)")

    @property
    def depth(self) -> int:
        return int(math.log2(self.image_size))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "GanConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidArgumentError(f"unknown GAN config keys: {sorted(unknown)}")
        return cls(**obj)


def patch_map_size(image_size: int) -> int:
    """Side length of the discriminator's logit map for a square input.

    Three stride-2 convolutions followed by two stride-1 ones, all with 4x4
    kernels and padding 1.
    """
    s = image_size
    for _ in range(3):
        s = (s + 2 - 4) // 2 + 1
    for _ in range(2):
        s = s + 2 - 4 + 1
    return s
