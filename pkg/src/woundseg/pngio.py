"""Grayscale/RGB PNG loading and saving for images, masks and probability maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .rasters import BinaryMask, ImageBuffer, ProbMask

#: 8-bit mask intensities at or above this value count as foreground.
MASK_FOREGROUND_THRESHOLD = 128


def load_image(path) -> ImageBuffer:
    """Load a clinical photo as an RGB image buffer."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return ImageBuffer(arr)


def load_mask(path, threshold: int = MASK_FOREGROUND_THRESHOLD) -> BinaryMask:
    """Load a ground-truth mask, binarising 8-bit intensities at the threshold.

    Tolerates anti-aliased mask edges in public dataset releases.
    """
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc
    return BinaryMask(arr >= threshold)


def load_prob_map(path) -> ProbMask:
    """Load a stored probability map from an 8-bit or 16-bit grayscale file.

    8-bit values decode as v/255, 16-bit as v/65535.
    """
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                scale = 65535.0
            else:
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                scale = 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read probability map {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"probability map {path} is not a single-channel raster")
    arr = arr / scale
    if arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise DataError(f"probability map {path} holds values outside [0, 1]")
    return ProbMask(arr)


def save_prob_map(path, prob: ProbMask) -> None:
    """Write a probability map as 8-bit grayscale PNG, value = round(p * 255)."""
    arr = np.rint(prob.data * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def save_mask(path, mask: BinaryMask) -> None:
    """Write a binary mask as 8-bit grayscale PNG (0 background, 255 foreground)."""
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def save_image(path, image: ImageBuffer) -> None:
    Image.fromarray(image.data, mode="RGB").save(Path(path), format="PNG")
