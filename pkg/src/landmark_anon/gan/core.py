"""Training, inference and the anonymization entry point."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from ..errors import InvalidArgumentError, NumericError
from ..imageops import (
    GAN_NORMALIZATION,
    FaceImage,
    denormalize,
    normalize,
    resize_max_axis,
    to_rgb,
    to_unit,
)
from ..raster import LandmarkImage, downsample_raster, landmark_image
from .checkpoint import GanCheckpoint
from .config import GanConfig
from .losses import discriminator_loss, generator_loss
from .models import PatchDiscriminator, UNetGenerator, build_models

log = logging.getLogger(__name__)


def raster_tensor(lm_imgs: Sequence[LandmarkImage], image_size: int) -> torch.Tensor:
    """Stack rasters as an (N, 3, S, S) tensor in [-1, 1].

    Larger rasters are max-pooled down to ``image_size``; the single channel
    is replicated to three.
    """
    arrs = []
    for img in lm_imgs:
        if img.size != (image_size, image_size):
            img = downsample_raster(img, image_size)
        arrs.append(img.raster)
    x = torch.from_numpy(np.stack(arrs).astype(np.float32) / 255.0) * 2.0 - 1.0
    return x[:, None].expand(-1, 3, -1, -1).contiguous()


def face_tensor(faces: Sequence[FaceImage], image_size: int) -> torch.Tensor:
    """Stack unit-range faces as a normalized (N, 3, S, S) tensor."""
    arrs = []
    for face in faces:
        face = to_rgb(to_unit(face))
        if (face.height, face.width) != (image_size, image_size):
            if face.height != face.width:
                raise InvalidArgumentError("faces must be square")
            face = resize_max_axis(face, image_size)
        arrs.append(normalize(face, GAN_NORMALIZATION).pixels)
    return torch.from_numpy(np.stack(arrs).astype(np.float32)).permute(0, 3, 1, 2).contiguous()


def tensor_to_face(t: torch.Tensor) -> FaceImage:
    px = t.detach().cpu().permute(1, 2, 0).numpy().astype(np.float64)
    return FaceImage(np.clip(px, -1.0, 1.0), "signed", "RGB")


class Synthesizer:
    """A generator loaded for read-only inference.

    Dropout is disabled and instance normalization has no running state, so
    the output depends only on the raster and the parameters.
    """

    def __init__(self, checkpoint: GanCheckpoint):
        self.config = checkpoint.config
        self.generator = UNetGenerator(self.config.image_size, self.config.base_channels)
        checkpoint.load_into(generator=self.generator)
        self.generator.eval()
        self.discriminator = None
        self._checkpoint = checkpoint

    def _disc(self) -> PatchDiscriminator:
        if self.discriminator is None:
            self.discriminator = PatchDiscriminator(self.config.base_channels)
            self._checkpoint.load_into(discriminator=self.discriminator)
            self.discriminator.eval()
        return self.discriminator

    @torch.no_grad()
    def forward(self, lm_img: LandmarkImage) -> FaceImage:
        x = raster_tensor([lm_img], self.config.image_size)
        return tensor_to_face(self.generator(x)[0])

    @torch.no_grad()
    def score(self, lm_img: LandmarkImage, face: FaceImage) -> np.ndarray:
        x = raster_tensor([lm_img], self.config.image_size)
        y = face_tensor([face], self.config.image_size)
        return self._disc()(x, y)[0, 0].numpy().astype(np.float64)

    def average_face(self) -> FaceImage:
        return self.forward(LandmarkImage.blank())


def _as_synthesizer(params) -> Synthesizer:
    if isinstance(params, Synthesizer):
        return params
    if isinstance(params, GanCheckpoint):
        return Synthesizer(params)
    raise InvalidArgumentError(f"expected a checkpoint or Synthesizer, got {type(params).__name__}")


def _check_raster_size(lm_img: LandmarkImage, image_size: int) -> None:
    h, w = lm_img.size
    if h != w or h < image_size or h % image_size:
        raise InvalidArgumentError(
            f"landmark raster {h}x{w} cannot be ingested at image_size {image_size}"
        )


def generator_forward(lm_img: LandmarkImage, params) -> FaceImage:
    """Synthesize a signed-range RGB face from a landmark raster."""
    synth = _as_synthesizer(params)
    _check_raster_size(lm_img, synth.config.image_size)
    return synth.forward(lm_img)


def discriminator_forward(lm_img: LandmarkImage, face: FaceImage, params) -> np.ndarray:
    """Patch logit map for a (raster, face) pair."""
    synth = _as_synthesizer(params)
    s = synth.config.image_size
    _check_raster_size(lm_img, s)
    if face.height != face.width or face.height < s or face.height % s:
        raise InvalidArgumentError(f"face {face.height}x{face.width} does not match image_size {s}")
    return synth.score(lm_img, face)


def anonymize(image: FaceImage, landmarker, params) -> FaceImage:
    """Replace a face by a synthetic one sharing its landmark geometry.

    The generator sees nothing but the landmark raster. When the landmarker
    finds no face the all-black raster is used, which yields the average face.
    """
    synth = _as_synthesizer(params)
    lms = landmarker.landmarks(image)
    out = synth.forward(landmark_image(lms))
    return denormalize(out, GAN_NORMALIZATION)


@dataclass(frozen=True)
class TrainLogRecord:
    epoch: int
    step: int
    generator_adv_loss: float
    generator_l1_loss: float
    discriminator_loss: float


class TrainLog(list):
    """A list of TrainLogRecord with CSV persistence."""

    COLUMNS = [f.name for f in fields(TrainLogRecord)]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.COLUMNS, lineterminator="\n")
            writer.writeheader()
            for rec in self:
                row = asdict(rec)
                for k in ("generator_adv_loss", "generator_l1_loss", "discriminator_loss"):
                    row[k] = repr(row[k])
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrainLog":
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.append(
                    TrainLogRecord(
                        int(row["epoch"]),
                        int(row["step"]),
                        float(row["generator_adv_loss"]),
                        float(row["generator_l1_loss"]),
                        float(row["discriminator_loss"]),
                    )
                )
        return out


def stack_pairs(pairs, image_size: int) -> tuple[torch.Tensor, torch.Tensor]:
    rasters = [p[0] for p in pairs]
    faces = [p[1] for p in pairs]
    return raster_tensor(rasters, image_size), face_tensor(faces, image_size)


@torch.no_grad()
def mean_l1(generator: torch.nn.Module, rasters: torch.Tensor, faces: torch.Tensor, batch_size=32) -> float:
    """Mean absolute error of the generator in eval mode, in normalized units."""
    was_training = generator.training
    generator.eval()
    total = 0.0
    for i in range(0, rasters.shape[0], batch_size):
        out = generator(rasters[i : i + batch_size])
        total += float((out - faces[i : i + batch_size]).abs().sum())
    generator.train(was_training)
    return total / faces.numel()


def train(
    pairs,
    config: GanConfig,
    checkpoint_dir: str | Path | None = None,
    on_epoch_end: Callable[[int, torch.nn.Module], None] | None = None,
) -> tuple[GanCheckpoint, TrainLog]:
    """Fit generator and discriminator on (landmark raster, face) pairs.

    ``pairs`` is a sequence of ``(LandmarkImage, FaceImage)`` or an already
    stacked ``(rasters, faces)`` tensor tuple. Each step updates the
    generator, then the discriminator. The data order, weight init and
    dropout masks are all drawn from ``config.seed``, so two runs on the
    same platform produce identical logs and parameters.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], torch.Tensor):
        rasters, faces = pairs
    else:
        pairs = list(pairs)
        if not pairs:
            raise InvalidArgumentError("training set is empty")
        rasters, faces = stack_pairs(pairs, config.image_size)
    n = rasters.shape[0]
    if n == 0:
        raise InvalidArgumentError("training set is empty")
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    trainlog = TrainLog()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        gen, disc = build_models(config)
        gen.train()
        disc.train()
        betas = (config.beta1, config.beta2)
        opt_g = torch.optim.Adam(gen.parameters(), lr=config.lr, betas=betas)
        opt_d = torch.optim.Adam(disc.parameters(), lr=config.lr, betas=betas)
        order_rng = torch.Generator().manual_seed(config.seed + 1)
        step = 0
        for epoch in range(config.epochs):
            perm = torch.randperm(n, generator=order_rng)
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                x, y = rasters[idx], faces[idx]

                fake = gen(x)
                g_loss, adv, l1 = generator_loss(disc(x, fake), fake, y, config.lambda_l1)
                opt_g.zero_grad(set_to_none=True)
                g_loss.backward()
                opt_g.step()

                d_loss = discriminator_loss(disc(x, y), disc(x, fake.detach()))
                opt_d.zero_grad(set_to_none=True)
                d_loss.backward()
                opt_d.step()

                rec = TrainLogRecord(epoch, step, adv.item(), l1.item(), d_loss.item())
                if not all(math.isfinite(v) for v in (rec.generator_adv_loss, rec.generator_l1_loss, rec.discriminator_loss)):
                    raise NumericError(f"non-finite loss at epoch {epoch} step {step}: {rec}")
                trainlog.append(rec)
                step += 1
            log.info(
                "epoch %d: g_adv=%.4f g_l1=%.4f d=%.4f",
                epoch, rec.generator_adv_loss, rec.generator_l1_loss, rec.discriminator_loss,
            )
            if checkpoint_dir is not None:
                GanCheckpoint.from_models(gen, disc, config, epoch + 1).save(
                    checkpoint_dir / f"epoch_{epoch + 1:03d}.lmck"
                )
            if on_epoch_end is not None:
                on_epoch_end(epoch, gen)
    return GanCheckpoint.from_models(gen, disc, config, config.epochs), trainlog


__all__ = [
    "Synthesizer",
    "TrainLog",
    "TrainLogRecord",
    "anonymize",
    "discriminator_forward",
    "generator_forward",
    "mean_l1",
    "raster_tensor",
    "face_tensor",
    "stack_pairs",
    "train",
]
