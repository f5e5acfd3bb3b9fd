"""Deterministic image transformations.

Everything here is a pure function of its inputs: arrays are never mutated
in place and no module-level state is touched, so the functions may be
called from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError

RANGES: dict[str, tuple[float, float]] = {
    "byte": (0.0, 255.0),
    "unit": (0.0, 1.0),
    "signed": (-1.0, 1.0),
    # output of a normalization whose image does not fit in [-1, 1]
    "standardized": (-np.inf, np.inf),
}
LAYOUTS = ("RGB", "grayscale")


@dataclass(frozen=True)
class FaceImage:
    """An H x W x C pixel array tagged with its value range and color layout.

    A 2-D array is accepted and promoted to a single-channel image.
    """

    pixels: np.ndarray
    range_tag: str = "unit"
    color_layout: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise InvalidArgumentError(f"expected HxWxC pixels, got shape {px.shape}")
        h, w, c = px.shape
        if h < 1 or w < 1 or c not in (1, 3):
            raise InvalidArgumentError(f"invalid image shape {px.shape}")
        if self.range_tag not in RANGES:
            raise InvalidArgumentError(f"unknown range tag {self.range_tag!r}")
        layout = self.color_layout or ("RGB" if c == 3 else "grayscale")
        if layout not in LAYOUTS or (layout == "RGB") != (c == 3):
            raise InvalidArgumentError(f"layout {layout!r} does not match {c} channels")
        lo, hi = RANGES[self.range_tag]
        if px.size and (px.min() < lo or px.max() > hi or not np.all(np.isfinite(px))):
            raise InvalidArgumentError(
                f"pixel values [{px.min()}, {px.max()}] outside {self.range_tag} range"
            )
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "color_layout", layout)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def replace(self, pixels: np.ndarray, range_tag: str | None = None) -> "FaceImage":
        return FaceImage(pixels, range_tag or self.range_tag, self.color_layout)


@dataclass(frozen=True)
class NormalizationSpec:
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise InvalidArgumentError("mean and std must have three components")
        if any(s <= 0 for s in self.std):
            raise InvalidArgumentError("std components must be strictly positive")

    def output_range_tag(self) -> str:
        m = np.asarray(self.mean)
        s = np.asarray(self.std)
        lo, hi = (0 - m) / s, (1 - m) / s
        return "signed" if lo.min() >= -1 and hi.max() <= 1 else "standardized"


GAN_NORMALIZATION = NormalizationSpec((0.5, 0.5, 0.5), (0.5, 0.5, 0.5))
CLASSIFIER_NORMALIZATION = NormalizationSpec((0.485, 0.456, 0.406), (0.229, 0.224, 0.225))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def resize_max_axis(img: FaceImage, target: int) -> FaceImage:
    """Bilinearly rescale so the longer axis equals ``target``."""
    if target <= 0:
        raise InvalidArgumentError(f"target must be positive, got {target}")
    h, w = img.height, img.width
    long_side = max(h, w)
    if long_side == target:
        return img.replace(img.pixels.copy())
    if h >= w:
        new_h, new_w = target, max(1, _round_half_up(w * target / h))
    else:
        new_h, new_w = max(1, _round_half_up(h * target / w)), target
    src = img.pixels.astype(np.float64)
    out = cv2.resize(src, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    if out.ndim == 2:
        out = out[:, :, None]
    lo, hi = RANGES[img.range_tag]
    return img.replace(np.clip(out, lo, hi))


def zero_pad_center(img: FaceImage, size: int) -> FaceImage:
    """Pad with zeros to ``size`` x ``size``; odd remainders go right/bottom."""
    h, w = img.height, img.width
    if h > size or w > size:
        raise InvalidArgumentError(f"image {h}x{w} does not fit in {size}x{size}")
    top = (size - h) // 2
    left = (size - w) // 2
    out = np.zeros((size, size, img.channels), dtype=img.pixels.dtype)
    out[top : top + h, left : left + w] = img.pixels
    return img.replace(out)


def pixelate(img: FaceImage, k: int) -> FaceImage:
    """Replace each k x k block by its per-channel mean.

    Blocks at the right/bottom border may be smaller than k x k and are
    averaged over their actual extent.
    """
    if k <= 0:
        raise InvalidArgumentError(f"block size must be positive, got {k}")
    px = img.pixels.astype(np.float64)
    h, w = px.shape[:2]
    rows = np.arange(0, h, k)
    cols = np.arange(0, w, k)
    sums = np.add.reduceat(np.add.reduceat(px, rows, axis=0), cols, axis=1)
    bh = np.diff(np.append(rows, h))
    bw = np.diff(np.append(cols, w))
    means = sums / (bh[:, None, None] * bw[None, :, None])
    bmax = np.maximum.reduceat(np.maximum.reduceat(px, rows, axis=0), cols, axis=1)
    bmin = np.minimum.reduceat(np.minimum.reduceat(px, rows, axis=0), cols, axis=1)
    # a constant block keeps its value bit-exactly
    means = np.where(bmax == bmin, bmin, means)
    lo, hi = RANGES[img.range_tag]
    means = np.clip(means, lo, hi)
    out = np.repeat(np.repeat(means, bh, axis=0), bw, axis=1)
    return img.replace(out)


def gaussian_sigma(k: int) -> float:
    return 0.3 * ((k - 1) / 2 - 1) + 0.8


def gaussian_kernel(k: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps for an odd kernel width ``k``."""
    if k < 1 or k % 2 == 0:
        raise InvalidArgumentError(f"kernel size must be odd and positive, got {k}")
    sigma = gaussian_sigma(k)
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2
    taps = np.exp(-(x**2) / (2 * sigma**2))
    return taps / taps.sum()


def blur(img: FaceImage, k: int) -> FaceImage:
    """Separable k x k Gaussian blur with half-sample symmetric borders."""
    taps = gaussian_kernel(k)
    px = img.pixels.astype(np.float64)
    out = ndimage.correlate1d(px, taps, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, taps, axis=1, mode="reflect")
    lo, hi = RANGES[img.range_tag]
    return img.replace(np.clip(out, lo, hi))


def normalize(img: FaceImage, spec: NormalizationSpec) -> FaceImage:
    if img.range_tag != "unit":
        raise InvalidArgumentError(f"normalize expects a unit-range image, got {img.range_tag}")
    mean, std = _channel_stats(img, spec)
    out = (img.pixels.astype(np.float64) - mean) / std
    return img.replace(out, spec.output_range_tag())


def denormalize(img: FaceImage, spec: NormalizationSpec) -> FaceImage:
    if img.range_tag not in ("signed", "standardized"):
        raise InvalidArgumentError(f"denormalize expects a normalized image, got {img.range_tag}")
    mean, std = _channel_stats(img, spec)
    out = img.pixels.astype(np.float64) * std + mean
    return img.replace(np.clip(out, 0.0, 1.0), "unit")


def _channel_stats(img: FaceImage, spec: NormalizationSpec):
    mean = np.asarray(spec.mean, dtype=np.float64)
    std = np.asarray(spec.std, dtype=np.float64)
    if img.channels == 1:
        return mean[:1], std[:1]
    return mean, std


def to_unit(img: FaceImage) -> FaceImage:
    """Convert a byte-range image to the unit range."""
    if img.range_tag == "unit":
        return img
    if img.range_tag != "byte":
        raise InvalidArgumentError(f"cannot convert {img.range_tag} image to unit range")
    return img.replace(img.pixels.astype(np.float64) / 255.0, "unit")


def to_rgb(img: FaceImage) -> FaceImage:
    if img.channels == 3:
        return img
    return FaceImage(np.repeat(img.pixels, 3, axis=2), img.range_tag, "RGB")
