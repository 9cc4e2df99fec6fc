"""Seeded synthetic blob datasets for desk-scale runs and tests.

Samples are bright reddish elliptical lesions on a darker skin-toned
background with mild pixel noise, so the colour channels alone separate
foreground from background.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .pngio import save_image, save_mask
from .rasters import BinaryMask, ImageBuffer


def make_blob_sample(rng: np.random.Generator, size: int = 64) -> tuple[ImageBuffer, BinaryMask]:
    """One synthetic image/mask pair with 1 or 2 elliptical lesions."""
    base = np.array(
        [rng.uniform(70, 110), rng.uniform(90, 130), rng.uniform(95, 135)]
    )
    img = np.ones((size, size, 3)) * base
    mask = np.zeros((size, size), dtype=bool)

    rows, cols = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(1, 3))):
        cy = rng.uniform(size * 0.25, size * 0.75)
        cx = rng.uniform(size * 0.25, size * 0.75)
        ry = rng.uniform(size * 0.10, size * 0.22)
        rx = rng.uniform(size * 0.10, size * 0.22)
        blob = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 <= 1.0
        mask |= blob
        lesion = np.array(
            [rng.uniform(185, 235), rng.uniform(35, 75), rng.uniform(40, 80)]
        )
        img[blob] = lesion

    img += rng.normal(0.0, 6.0, img.shape)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return ImageBuffer(img), BinaryMask(mask)


def make_blob_dataset(
    n: int, size: int = 64, seed: int = 0
) -> list[tuple[ImageBuffer, BinaryMask]]:
    rng = np.random.default_rng(seed)
    return [make_blob_sample(rng, size) for _ in range(n)]


def write_blob_dataset(root, n: int, size: int = 64, seed: int = 0) -> list[str]:
    """Write a synthetic dataset in the root/images + root/masks layout.

    Returns the generated image ids (img_000, img_001, ...).
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    ids = []
    for i, (image, mask) in enumerate(make_blob_dataset(n, size, seed)):
        image_id = f"img_{i:03d}"
        save_image(root / "images" / f"{image_id}.png", image)
        save_mask(root / "masks" / f"{image_id}.png", mask)
        ids.append(image_id)
    return ids
