"""Facial landmark sets and their single-pixel raster images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .io import load_gray_u8, save_gray_u8

NUM_LANDMARKS = 478
RASTER_SIZE = 512
WHITE = 255


@dataclass(frozen=True)
class LandmarkSet:
    """Exactly 478 (x, y, z) points; x and y are normalized to the face image.

    Out-of-frame points (x or y outside [0, 1]) are accepted here, since
    landmark models do emit them, and are dropped at projection time.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (NUM_LANDMARKS, 3):
            raise InvalidArgumentError(
                f"expected {NUM_LANDMARKS} landmark triples, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> "LandmarkSet":
        return cls(np.array([list(t) for t in triples], dtype=np.float64))

    def to_triples(self) -> list[list[float]]:
        return self.points.tolist()


@dataclass(frozen=True)
class LandmarkImage:
    """Single-channel uint8 raster with white (255) landmark pixels on black."""

    raster: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.raster)
        if r.ndim != 2 or r.dtype != np.uint8:
            raise InvalidArgumentError("landmark raster must be a 2-D uint8 array")
        if not np.all((r == 0) | (r == WHITE)):
            raise InvalidArgumentError("landmark raster values must be 0 or 255")
        object.__setattr__(self, "raster", r)

    @property
    def size(self) -> tuple[int, int]:
        return self.raster.shape

    def white_pixel_count(self) -> int:
        return int(np.count_nonzero(self.raster))

    @classmethod
    def blank(cls, width: int = RASTER_SIZE, height: int = RASTER_SIZE) -> "LandmarkImage":
        return cls(np.zeros((height, width), dtype=np.uint8))

    def save(self, path: str | Path) -> None:
        save_gray_u8(self.raster, path)

    @classmethod
    def load(cls, path: str | Path) -> "LandmarkImage":
        return cls(load_gray_u8(path))


def project_landmarks(lms: LandmarkSet, width: int, height: int) -> list[tuple[int, int]]:
    """Orthographic projection of landmarks to integer (col, row) pixels.

    The depth coordinate is discarded; x and y are scaled by (size - 1) and
    rounded half-up. Points landing outside the grid are dropped.
    """
    xy = lms.points[:, :2]
    cols = np.floor(xy[:, 0] * (width - 1) + 0.5).astype(np.int64)
    rows = np.floor(xy[:, 1] * (height - 1) + 0.5).astype(np.int64)
    keep = (cols >= 0) & (cols < width) & (rows >= 0) & (rows < height)
    return list(zip(cols[keep].tolist(), rows[keep].tolist()))


def rasterize(
    coords: Iterable[tuple[int, int]], width: int = RASTER_SIZE, height: int = RASTER_SIZE
) -> LandmarkImage:
    raster = np.zeros((height, width), dtype=np.uint8)
    coords = list(coords)
    if coords:
        c = np.asarray(coords, dtype=np.int64)
        if c[:, 0].min() < 0 or c[:, 0].max() >= width or c[:, 1].min() < 0 or c[:, 1].max() >= height:
            raise InvalidArgumentError("raster coordinates out of bounds")
        raster[c[:, 1], c[:, 0]] = WHITE
    return LandmarkImage(raster)


def landmark_image(
    lms: LandmarkSet | None, width: int = RASTER_SIZE, height: int = RASTER_SIZE
) -> LandmarkImage:
    """Project and rasterize; ``None`` yields the all-black raster."""
    if lms is None:
        return LandmarkImage.blank(width, height)
    return rasterize(project_landmarks(lms, width, height), width, height)


def downsample_raster(img: LandmarkImage, size: int) -> LandmarkImage:
    """Shrink a square raster by an integer factor with max-pooling.

    Max-pooling keeps every landmark visible and the result binary.
    """
    h, w = img.size
    if h != w:
        raise InvalidArgumentError("only square rasters can be resampled")
    if size == h:
        return img
    if size > h or h % size:
        raise InvalidArgumentError(f"cannot resample a {h}px raster to {size}px")
    f = h // size
    pooled = img.raster.reshape(size, f, size, f).max(axis=(1, 3))
    return LandmarkImage(np.ascontiguousarray(pooled))
