"""Embedder and classifier adapters for the evaluation protocols.

The synthetic implementations are deterministic functions of coarse pixel
statistics. They exercise every code path of the reports but carry no
semantic meaning; real runs plug in external models instead.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import cv2
import numpy as np

from ..imageops import FaceImage, to_rgb, to_unit

GRID = 8


@runtime_checkable
class EmbedderAdapter(Protocol):
    def embed(self, image: FaceImage) -> np.ndarray | None: ...


@runtime_checkable
class ClassifierAdapter(Protocol):
    def predict(self, image: FaceImage) -> dict[str, float]: ...


def pixel_features(image: FaceImage) -> np.ndarray:
    """Area-averaged GRID x GRID RGB thumbnail, flattened, unit range."""
    px = to_rgb(to_unit(image)).pixels.astype(np.float64)
    thumb = cv2.resize(px, (GRID, GRID), interpolation=cv2.INTER_AREA)
    return thumb.reshape(-1)


class PixelStatsEmbedder:
    """Thumbnail embedding; returns None for an all-black image."""

    identifier = "synthetic-pixel-stats/1"

    def embed(self, image: FaceImage) -> np.ndarray | None:
        f = pixel_features(image)
        if not np.any(f):
            return None
        return f


class _Projection:
    def __init__(self, names: Sequence[str], seed: int, scale: float):
        self.names = list(names)
        rng = np.random.default_rng(seed)
        self.weights = rng.normal(0.0, 1.0, size=(len(self.names), GRID * GRID * 3))
        self.scale = scale

    def logits(self, image: FaceImage) -> np.ndarray:
        f = pixel_features(image) - 0.5
        return self.scale * (self.weights @ f) / np.sqrt(f.size)


class SyntheticEmotionClassifier(_Projection):
    """Softmax over a fixed random projection of the thumbnail."""

    identifier = "synthetic-emotion/1"

    def __init__(self, labels: Sequence[str], seed: int = 0, scale: float = 4.0):
        super().__init__(labels, seed, scale)

    def predict(self, image: FaceImage) -> dict[str, float]:
        z = self.logits(image)
        z = np.exp(z - z.max())
        p = z / z.sum()
        return {name: float(v) for name, v in zip(self.names, p)}


class SyntheticTraitClassifier(_Projection):
    """Independent sigmoids over a fixed random projection of the thumbnail."""

    identifier = "synthetic-traits/1"

    def __init__(self, traits: Sequence[str], seed: int = 1, scale: float = 4.0):
        super().__init__(traits, seed, scale)

    def predict(self, image: FaceImage) -> dict[str, float]:
        p = 1.0 / (1.0 + np.exp(-self.logits(image)))
        return {name: float(v) for name, v in zip(self.names, p)}


def adapter_id(adapter) -> str:
    return getattr(adapter, "identifier", type(adapter).__name__)
