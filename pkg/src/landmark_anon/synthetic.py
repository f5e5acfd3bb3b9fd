"""Synthetic faces for desk-scale training, tests and the bundled fixtures.

A synthetic face is a handful of random shape parameters. From them we get
both a 478-point landmark set (the canonical template, scaled, rotated and
with the mouth opened) and a smooth rendering of a head-like shape whose
eyes and mouth sit where those landmarks are.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .adapters import FaceDetection, GeometricAdapter, canonical_template, image_digest, write_sidecar
from .facepipe import apply_segmentation, extract_faces
from .imageops import FaceImage
from .io import load_image, save_image
from .raster import LandmarkImage, LandmarkSet, landmark_image

_LIPS = slice(420 - 100, 420)  # outer and inner lip rings of the template


@dataclass(frozen=True)
class FaceParams:
    cx: float
    cy: float
    scale_x: float
    scale_y: float
    angle: float  # radians
    mouth_open: float
    skin: tuple[float, float, float]

    @classmethod
    def random(cls, rng: np.random.Generator) -> "FaceParams":
        return cls(
            cx=float(rng.uniform(0.42, 0.58)),
            cy=float(rng.uniform(0.42, 0.58)),
            scale_x=float(rng.uniform(0.6, 0.95)),
            scale_y=float(rng.uniform(0.7, 0.95)),
            angle=float(rng.uniform(-0.25, 0.25)),
            mouth_open=float(rng.uniform(0.0, 1.0)),
            skin=tuple(float(v) for v in rng.uniform([0.55, 0.35, 0.25], [0.95, 0.8, 0.7])),
        )

    def transform(self, xy: np.ndarray) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        local = (xy - 0.5) * [self.scale_x, self.scale_y]
        rot = local @ np.array([[c, s], [-s, c]])
        return rot + [self.cx, self.cy]


def face_landmarks(params: FaceParams) -> LandmarkSet:
    t = np.array(canonical_template())
    xy = t[:, :2].copy()
    lips = xy[_LIPS]
    # open the mouth: push lip points away from the mouth line
    lips[:, 1] += 0.05 * params.mouth_open * np.sign(lips[:, 1] - 0.76)
    xy[_LIPS] = lips
    return LandmarkSet(np.concatenate([params.transform(xy), t[:, 2:]], axis=1))


def render_face(params: FaceParams, size: int) -> FaceImage:
    """Smooth unit-range RGB rendering on a black background."""
    g = (np.arange(size) + 0.5) / size
    yy, xx = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    # back-transform pixel centers into template coordinates
    c, s = np.cos(params.angle), np.sin(params.angle)
    local = (pts - [params.cx, params.cy]) @ np.array([[c, -s], [s, c]])
    u = local[:, 0] / params.scale_x + 0.5
    v = local[:, 1] / params.scale_y + 0.5
    u = u.reshape(size, size)
    v = v.reshape(size, size)

    def ellipse(cx, cy, rx, ry):
        return ((u - cx) / rx) ** 2 + ((v - cy) / ry) ** 2

    head = 1.0 / (1.0 + np.exp((ellipse(0.5, 0.52, 0.36, 0.44) - 1.0) * 12.0))
    shade = 0.75 + 0.25 * np.clip(1.0 - ellipse(0.5, 0.45, 0.5, 0.6), 0.0, 1.0)
    img = head[..., None] * shade[..., None] * np.asarray(params.skin)
    for ex in (0.36, 0.64):
        eye = np.exp(-ellipse(ex, 0.42, 0.07, 0.03) * 2.0)
        img *= 1.0 - 0.8 * eye[..., None]
    mouth_h = 0.015 + 0.05 * params.mouth_open
    mouth = np.exp(-ellipse(0.5, 0.76, 0.11, mouth_h) * 2.0)
    img = img * (1.0 - mouth[..., None]) + mouth[..., None] * head[..., None] * [0.6, 0.15, 0.15]
    img = ndimage.gaussian_filter(img, sigma=(size / 128, size / 128, 0))
    return FaceImage(np.clip(img, 0.0, 1.0), "unit", "RGB")


def synthetic_pairs(n: int, image_size: int = 64, seed: int = 0) -> list[tuple[LandmarkImage, FaceImage]]:
    """``n`` (512px landmark raster, ``image_size`` face) training pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        params = FaceParams.random(rng)
        out.append((landmark_image(face_landmarks(params)), render_face(params, image_size)))
    return out


def random_landmark_set(rng: np.random.Generator, out_of_frame: float = 0.0) -> LandmarkSet:
    """Uniformly scattered landmarks; a fraction may fall just outside [0, 1]."""
    pts = rng.uniform(0.0, 1.0, size=(478, 3))
    if out_of_frame:
        k = int(round(out_of_frame * 478))
        idx = rng.choice(478, size=k, replace=False)
        pts[idx, :2] = rng.uniform(-0.2, 1.2, size=(k, 2))
    return LandmarkSet(pts)


def scene_image(rng: np.random.Generator, height: int, width: int, boxes) -> FaceImage:
    """A noisy background with a rendered face pasted into each box."""
    img = rng.uniform(0.05, 0.35, size=(height, width, 3))
    for x, y, w, h in boxes:
        size = max(w, h)
        face = render_face(FaceParams.random(rng), size).pixels
        face = face[(size - h) // 2 : (size - h) // 2 + h, (size - w) // 2 : (size - w) // 2 + w]
        region = img[y : y + h, x : x + w]
        region[:] = np.where(face.sum(axis=2, keepdims=True) > 0.05, face, region)
    return FaceImage(np.clip(img, 0, 1), "unit", "RGB")


class _StaticDetector:
    def __init__(self, dets):
        self.dets = dets

    def detect(self, _image):
        return list(self.dets)


FIXTURE_NO_FACE = ("img_003.png", "img_007.png")
FIXTURE_TWO_FACES = ("img_005.png",)


def write_fixture_dataset(directory: str | Path, seed: int = 0) -> Path:
    """Write the bundled 10-image fixture set with replay sidecars.

    Two images (``FIXTURE_NO_FACE``) have no recorded detections, one has two
    faces with confidences 0.9 and 0.7. Sidecar landmarks are keyed by the
    digest of each extracted, geometrically segmented face, so the set can
    be prepared with the replay adapter for detection and landmarks.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    geo = GeometricAdapter()
    with open(directory / "labels.csv", "w") as fh:
        fh.write("filename,label\n")
        for i in range(10):
            name = f"img_{i:03d}.png"
            h, w = int(rng.integers(140, 260)), int(rng.integers(140, 260))
            if name in FIXTURE_NO_FACE:
                boxes, confs = [], []
            elif name in FIXTURE_TWO_FACES:
                w = max(w, 200)
                half = w // 2
                boxes = [(2, 4, half - 4, h - 8), (half + 2, 4, w - half - 4, h - 8)]
                confs = [0.7, 0.9]
            else:
                bw, bh = int(w * 0.7), int(h * 0.8)
                boxes = [((w - bw) // 2, (h - bh) // 2, bw, bh)]
                confs = [float(np.round(rng.uniform(0.8, 1.0), 3))]
            image = scene_image(rng, h, w, boxes)
            save_image(image, directory / name)
            dets = []
            for (x, y, bw, bh), conf in zip(boxes, confs):
                tilt = float(rng.uniform(-4, 4))
                eyes = {
                    "left_eye": (x + 0.36 * bw, y + 0.42 * bh - tilt),
                    "right_eye": (x + 0.64 * bw, y + 0.42 * bh + tilt),
                }
                dets.append(FaceDetection((float(x), float(y), float(bw), float(bh)), eyes, conf))
            # digests must be taken from the PNG as written
            stored = load_image(directory / name)
            faces = []
            for face in extract_faces(stored, _StaticDetector(dets)):
                seg = apply_segmentation(face, geo.segment(face))
                faces.append((image_digest(seg), geo.landmarks(seg)))
            write_sidecar(directory / f"img_{i:03d}.json", name, dets, faces)
            fh.write(f"{name},{['neutral', 'happy'][i % 2]}\n")
    return directory
