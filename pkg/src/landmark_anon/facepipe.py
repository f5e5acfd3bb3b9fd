"""Face preprocessing: crop, align, resize, pad, segment, landmark."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .adapters import (
    DetectorAdapter,
    FaceDetection,
    LandmarkAdapter,
    SegmentationMask,
    SegmenterAdapter,
)
from .errors import AlignmentUndefinedError, InvalidArgumentError
from .imageops import FaceImage, resize_max_axis, to_rgb, zero_pad_center
from .io import list_images, load_image, save_gray_u8, save_image
from .raster import RASTER_SIZE, landmark_image

log = logging.getLogger(__name__)

FACE_SIZE = 512
MANIFEST_NAME = "manifest.json"


def eye_angle(keypoints: dict[str, tuple[float, float]]) -> float:
    """Angle in degrees of the left-eye to right-eye segment (image y axis down)."""
    try:
        lx, ly = keypoints["left_eye"]
        rx, ry = keypoints["right_eye"]
    except KeyError as exc:
        raise AlignmentUndefinedError(f"missing keypoint {exc}") from None
    if lx == rx and ly == ry:
        raise AlignmentUndefinedError("left and right eye coincide")
    return math.degrees(math.atan2(ry - ly, rx - lx))


def alignment_matrix(keypoints, width: int, height: int) -> np.ndarray:
    """2x3 affine that rotates about the image center to level the eyes."""
    center = ((width - 1) / 2.0, (height - 1) / 2.0)
    return cv2.getRotationMatrix2D(center, eye_angle(keypoints), 1.0)


def align_face(crop: FaceImage, keypoints: dict[str, tuple[float, float]]) -> FaceImage:
    """Rotate ``crop`` so the eye line is horizontal, left eye on the left.

    Keypoints are in crop pixel coordinates. Exposed corners are filled with 0.
    """
    angle = eye_angle(keypoints)
    if angle == 0.0:
        return crop.replace(crop.pixels.copy())
    m = alignment_matrix(keypoints, crop.width, crop.height)
    src = crop.pixels.astype(np.float64)
    out = cv2.warpAffine(
        src,
        m,
        (crop.width, crop.height),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    if out.ndim == 2:
        out = out[:, :, None]
    return crop.replace(out)


def _crop_box(det: FaceDetection, width: int, height: int) -> tuple[int, int, int, int] | None:
    x, y, w, h = det.bbox
    x0 = min(max(int(math.floor(x)), 0), width)
    y0 = min(max(int(math.floor(y)), 0), height)
    x1 = min(max(int(math.ceil(x + w)), 0), width)
    y1 = min(max(int(math.ceil(y + h)), 0), height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def extract_face(image: FaceImage, det: FaceDetection, size: int = FACE_SIZE) -> FaceImage | None:
    box = _crop_box(det, image.width, image.height)
    if box is None:
        return None
    x0, y0, x1, y1 = box
    crop = image.replace(image.pixels[y0:y1, x0:x1])
    kps = {k: (v[0] - x0, v[1] - y0) for k, v in det.keypoints.items()}
    try:
        crop = align_face(crop, kps)
    except AlignmentUndefinedError as exc:
        log.info("skipping alignment: %s", exc)
    return zero_pad_center(resize_max_axis(crop, size), size)


def extract_faces(
    image: FaceImage, detector: DetectorAdapter, size: int = FACE_SIZE
) -> list[FaceImage]:
    """One aligned, resized and zero-padded face per detection.

    Faces come back ordered by descending detection confidence.
    """
    dets = sorted(detector.detect(image), key=lambda d: -d.confidence)
    if not dets:
        log.info("no faces detected")
    faces = []
    for det in dets:
        face = extract_face(image, det, size)
        if face is not None:
            faces.append(face)
    return faces


def apply_segmentation(face: FaceImage, mask: SegmentationMask) -> FaceImage:
    if mask.mask.shape != (face.height, face.width):
        raise InvalidArgumentError(
            f"mask shape {mask.mask.shape} does not match image {(face.height, face.width)}"
        )
    out = face.pixels * mask.mask[:, :, None].astype(face.pixels.dtype)
    return face.replace(out)


@dataclass
class PreparationManifest:
    records: list[dict] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        status = [r["status"] for r in self.records]
        return {
            "total": len(status),
            "prepared": status.count("prepared"),
            "discarded": status.count("discarded"),
            "failed": status.count("failed"),
            "faces": sum(len(r.get("faces", [])) for r in self.records),
        }

    def to_json(self) -> dict:
        return {"counts": self.counts, "records": self.records}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "PreparationManifest":
        return cls(json.loads(Path(path).read_text())["records"])

    def face_entries(self):
        """Yield (record, face entry) for every prepared face."""
        for rec in self.records:
            for face in rec.get("faces", []):
                yield rec, face


def read_labels(path: str | Path) -> dict[str, str]:
    with open(path, newline="") as fh:
        return {row["filename"]: row["label"] for row in csv.DictReader(fh)}


def _process_one(path: Path, detector, segmenter, landmarker, out: Path) -> dict:
    rec: dict = {"source": path.name, "faces": []}
    try:
        image = to_rgb(load_image(path))
    except (OSError, ValueError) as exc:
        log.warning("cannot read %s: %s", path.name, exc)
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return rec
    faces = extract_faces(image, detector)
    if not faces:
        rec["status"] = "discarded"
        return rec
    for i, crop in enumerate(faces):
        stem = f"{path.stem}_{i}"
        mask = segmenter.segment(crop)
        face = apply_segmentation(crop, mask)
        lms = landmarker.landmarks(face)
        entry = {
            "index": i,
            "crop": f"crops/{stem}.png",
            "face": f"faces/{stem}.png",
            "mask": f"masks/{stem}.png",
            "landmarks": f"landmarks/{stem}.png",
            "has_landmarks": lms is not None,
        }
        save_image(crop, out / entry["crop"])
        save_image(face, out / entry["face"])
        save_gray_u8(mask.mask * np.uint8(255), out / entry["mask"])
        landmark_image(lms, RASTER_SIZE, RASTER_SIZE).save(out / entry["landmarks"])
        rec["faces"].append(entry)
    rec["status"] = "prepared"
    return rec


def prepare_dataset(
    source_dir: str | Path,
    detector: DetectorAdapter,
    segmenter: SegmenterAdapter,
    landmarker: LandmarkAdapter,
    output_dir: str | Path,
    labels_csv: str | Path | None = None,
    workers: int = 1,
) -> PreparationManifest:
    """Run the preprocessing stages over every image in ``source_dir``.

    Writes aligned crops, segmented faces, masks and landmark rasters under
    ``output_dir`` plus ``manifest.json``. Unreadable files are recorded as
    failed rather than raised. With ``workers > 1`` the adapters must be safe
    to share between threads.
    """
    source_dir = Path(source_dir)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = read_labels(labels_csv) if labels_csv else {}
    files = list_images(source_dir)

    def run(path):
        return _process_one(path, detector, segmenter, landmarker, out)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, files))
    else:
        records = [run(p) for p in files]
    for rec in records:
        if rec["source"] in labels:
            rec["label"] = labels[rec["source"]]
    manifest = PreparationManifest(records)
    manifest.write(out / MANIFEST_NAME)
    log.info("prepared dataset: %s", manifest.counts)
    return manifest
