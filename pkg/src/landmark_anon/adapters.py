"""Detector, segmenter and landmarker adapters.

The pipeline only depends on the three protocols below. Two in-process
implementations ship with the package:

* :class:`GeometricAdapter` needs no model at all: one full-frame detection,
  an elliptical head mask and a canonical landmark template stretched over
  the non-black area of the face.
* :class:`ReplayAdapter` replays detections and landmarks recorded in JSON
  sidecar files, looked up by a digest of the image content.

Out-of-process models are wired in through :mod:`landmark_anon.external`.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InvalidArgumentError
from .imageops import FaceImage
from .io import load_image, to_uint8
from .raster import NUM_LANDMARKS, LandmarkSet

log = logging.getLogger(__name__)

SIDECAR_VERSION = 1


@dataclass(frozen=True)
class FaceDetection:
    bbox: tuple[float, float, float, float]  # x, y, w, h
    keypoints: dict[str, tuple[float, float]] = field(default_factory=dict)
    confidence: float = 1.0

    def __post_init__(self):
        if len(self.bbox) != 4 or self.bbox[2] < 0 or self.bbox[3] < 0:
            raise InvalidArgumentError(f"invalid bbox {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgumentError(f"confidence {self.confidence} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "bbox": list(self.bbox),
            "keypoints": {k: list(v) for k, v in sorted(self.keypoints.items())},
            "confidence": self.confidence,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FaceDetection":
        return cls(
            bbox=tuple(float(v) for v in obj["bbox"]),
            keypoints={k: (float(v[0]), float(v[1])) for k, v in obj.get("keypoints", {}).items()},
            confidence=float(obj.get("confidence", 1.0)),
        )


@dataclass(frozen=True)
class SegmentationMask:
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise InvalidArgumentError("mask must be 2-D")
        if not np.all((m == 0) | (m == 1)):
            raise InvalidArgumentError("mask values must be 0 or 1")
        object.__setattr__(self, "mask", m.astype(np.uint8))


@runtime_checkable
class DetectorAdapter(Protocol):
    def detect(self, image: FaceImage) -> list[FaceDetection]: ...


@runtime_checkable
class SegmenterAdapter(Protocol):
    def segment(self, face: FaceImage) -> SegmentationMask: ...


@runtime_checkable
class LandmarkAdapter(Protocol):
    def landmarks(self, face: FaceImage) -> LandmarkSet | None: ...


def image_digest(img: FaceImage) -> str:
    """SHA-256 over the 8-bit quantized pixels and the shape."""
    px = to_uint8(img)
    h = hashlib.sha256()
    h.update(repr(px.shape).encode())
    h.update(px.tobytes())
    return h.hexdigest()


def _ring(n, cx, cy, rx, ry, start=0.0):
    t = start + 2 * np.pi * np.arange(n) / n
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


@lru_cache(maxsize=1)
def canonical_template() -> np.ndarray:
    """A fixed 478-point face template in the unit square, shape (478, 3).

    Coarse stand-in for a face mesh: oval, brows, eyes, irises, nose, lips
    and a cheek grid. Depth is a smooth bulge toward the nose tip.
    """
    parts = [
        _ring(120, 0.5, 0.52, 0.36, 0.44),  # face oval
        _ring(40, 0.36, 0.42, 0.07, 0.03),  # eyes
        _ring(40, 0.64, 0.42, 0.07, 0.03),
        _ring(5, 0.36, 0.42, 0.015, 0.015),  # irises
        _ring(5, 0.64, 0.42, 0.015, 0.015),
        np.stack([np.linspace(0.26, 0.44, 30), 0.34 - 0.02 * np.sin(np.linspace(0, np.pi, 30))], 1),
        np.stack([np.linspace(0.56, 0.74, 30), 0.34 - 0.02 * np.sin(np.linspace(0, np.pi, 30))], 1),
        np.stack([np.full(25, 0.5), np.linspace(0.42, 0.62, 25)], 1),  # nose bridge
        _ring(25, 0.5, 0.63, 0.05, 0.025),  # nostrils
        _ring(60, 0.5, 0.76, 0.12, 0.045),  # outer lips
        _ring(40, 0.5, 0.76, 0.08, 0.015),  # inner lips
    ]
    xy = np.concatenate(parts, axis=0)
    missing = NUM_LANDMARKS - len(xy)
    gx, gy = np.meshgrid(np.linspace(0.22, 0.78, 10), np.linspace(0.5, 0.66, 8))
    cheeks = np.stack([gx.ravel(), gy.ravel()], 1)
    cheeks = cheeks[np.abs(cheeks[:, 0] - 0.5) > 0.08][:missing]
    xy = np.concatenate([xy, cheeks], axis=0)
    assert xy.shape == (NUM_LANDMARKS, 2)
    z = -0.1 * np.exp(-(((xy[:, 0] - 0.5) / 0.2) ** 2 + ((xy[:, 1] - 0.6) / 0.25) ** 2))
    out = np.concatenate([xy, z[:, None]], axis=1)
    out.setflags(write=False)
    return out


TEMPLATE_EYES = {"left_eye": (0.36, 0.42), "right_eye": (0.64, 0.42)}


def content_box(img: FaceImage) -> tuple[int, int, int, int] | None:
    """Bounding box (x, y, w, h) of the non-black pixels, or None if all black."""
    nz = np.any(img.pixels != 0, axis=2)
    rows = np.flatnonzero(nz.any(axis=1))
    cols = np.flatnonzero(nz.any(axis=0))
    if rows.size == 0:
        return None
    return int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)


def warp_template(box: tuple[float, float, float, float], width: int, height: int) -> LandmarkSet:
    """Map the canonical template into ``box`` and normalize by the frame size."""
    x, y, w, h = box
    t = canonical_template()
    px = x + t[:, 0] * (w - 1)
    py = y + t[:, 1] * (h - 1)
    pts = np.stack([px / max(width - 1, 1), py / max(height - 1, 1), t[:, 2]], axis=1)
    return LandmarkSet(pts)


class GeometricAdapter:
    """Model-free detector, segmenter and landmarker."""

    def detect(self, image: FaceImage) -> list[FaceDetection]:
        w, h = image.width, image.height
        eyes = {k: (v[0] * (w - 1), v[1] * (h - 1)) for k, v in TEMPLATE_EYES.items()}
        return [FaceDetection((0.0, 0.0, float(w), float(h)), eyes, 1.0)]

    def segment(self, face: FaceImage) -> SegmentationMask:
        h, w = face.height, face.width
        yy, xx = np.mgrid[0:h, 0:w]
        cy, cx = (h - 1) / 2, (w - 1) / 2
        inside = ((xx - cx) / (0.45 * w)) ** 2 + ((yy - cy) / (0.5 * h)) ** 2 <= 1.0
        return SegmentationMask(inside.astype(np.uint8))

    def landmarks(self, face: FaceImage) -> LandmarkSet | None:
        box = content_box(face)
        if box is None:
            return None
        return warp_template(box, face.width, face.height)


class ReplayAdapter:
    """Replays recorded detections and landmarks from JSON sidecars.

    Each sidecar describes one source image::

        {"version": 1, "image": "img_000.png",
         "detections": [{"bbox": [x, y, w, h], "keypoints": {...}, "confidence": 0.9}],
         "faces": [{"sha256": "...", "landmarks": [[x, y, z], ...]}]}

    Detections are served for the image named in the sidecar, landmarks for
    any face whose digest matches a ``faces`` entry. Unknown images get no
    detections, unknown faces no landmarks.
    """

    def __init__(self, sidecar_dir: str | Path, image_dir: str | Path | None = None):
        sidecar_dir = Path(sidecar_dir)
        image_dir = Path(image_dir) if image_dir is not None else sidecar_dir
        self._detections: dict[str, list[FaceDetection]] = {}
        self._landmarks: dict[str, LandmarkSet | None] = {}
        for path in sorted(sidecar_dir.glob("*.json")):
            obj = json.loads(path.read_text())
            if not isinstance(obj, dict) or "image" not in obj:
                continue
            if obj.get("version") != SIDECAR_VERSION:
                raise InvalidArgumentError(f"{path}: unsupported sidecar version {obj.get('version')}")
            src = image_dir / obj["image"]
            try:
                digest = image_digest(load_image(src))
            except OSError:
                log.warning("sidecar %s refers to unreadable image %s", path.name, src)
                continue
            self._detections[digest] = [FaceDetection.from_json(d) for d in obj.get("detections", [])]
            for face in obj.get("faces", []):
                lms = face.get("landmarks")
                self._landmarks[face["sha256"]] = LandmarkSet.from_triples(lms) if lms else None

    def detect(self, image: FaceImage) -> list[FaceDetection]:
        return list(self._detections.get(image_digest(image), []))

    def landmarks(self, face: FaceImage) -> LandmarkSet | None:
        return self._landmarks.get(image_digest(face))


def write_sidecar(
    path: str | Path,
    image_name: str,
    detections: list[FaceDetection],
    faces: list[tuple[str, LandmarkSet | None]] = (),
) -> None:
    obj = {
        "version": SIDECAR_VERSION,
        "image": image_name,
        "detections": [d.to_json() for d in detections],
        "faces": [
            {"sha256": digest, "landmarks": lms.to_triples() if lms is not None else None}
            for digest, lms in faces
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
