"""PNG/JPEG reading and writing for FaceImage and masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .imageops import FaceImage

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def list_images(directory: str | Path) -> list[Path]:
    """Image files directly under ``directory``, sorted by filename."""
    directory = Path(directory)
    return sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )


def load_image(path: str | Path, mode: str = "RGB") -> FaceImage:
    """Decode an image file into a unit-range FaceImage."""
    with Image.open(path) as im:
        im = im.convert("RGB" if mode == "RGB" else "L")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return FaceImage(arr, "unit")


def to_uint8(img: FaceImage) -> np.ndarray:
    px = img.pixels.astype(np.float64)
    if img.range_tag == "unit":
        px = px * 255.0
    elif img.range_tag == "signed":
        px = (px + 1.0) * 127.5
    elif img.range_tag != "byte":
        raise ValueError(f"cannot encode {img.range_tag} image")
    return np.clip(np.floor(px + 0.5), 0, 255).astype(np.uint8)


def save_image(img: FaceImage, path: str | Path) -> None:
    arr = to_uint8(img)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG")


def save_gray_u8(arr: np.ndarray, path: str | Path) -> None:
    """Write a 2-D uint8 array as a single-channel PNG."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise ValueError("expected a 2-D uint8 array")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG")


def load_gray_u8(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8).copy()
