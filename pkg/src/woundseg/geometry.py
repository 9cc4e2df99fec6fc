"""Dihedral test-time augmentation transforms and stochastic training augmentations.

Conventions (fixed so that independent implementations can match bit-exactly):

* a TTA variant applies the rotation first, then the horizontal flip;
* rotations are counter-clockwise quarter turns;
* ``tta_predict`` accumulates restored predictions in canonical variant order
  (sorted by rotation, then flip), so the output does not depend on the order
  of the supplied variant list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .averaging import pairwise_mean
from .rasters import BinaryMask, ImageBuffer, ProbMask

Raster = ImageBuffer | ProbMask | BinaryMask


@dataclass(frozen=True, order=True)
class TtaVariant:
    """One element of the dihedral group used for test-time augmentation."""

    rotation_quarter_turns: int = 0
    hflip: bool = False

    def __post_init__(self):
        if self.rotation_quarter_turns not in (0, 1, 2, 3):
            raise ValueError(
                f"rotation_quarter_turns must be 0..3, got {self.rotation_quarter_turns}"
            )


IDENTITY_VARIANT = TtaVariant(0, False)

#: All 8 rotation/flip combinations, in canonical order.
ALL_VARIANTS: tuple[TtaVariant, ...] = tuple(
    TtaVariant(rot, flip) for rot in range(4) for flip in (False, True)
)

#: The literal reading of "quarter-turn rotations as well as horizontal flipping".
ROTATIONS_PLUS_HFLIP: tuple[TtaVariant, ...] = tuple(
    TtaVariant(rot, False) for rot in range(4)
) + (TtaVariant(0, True),)


def _transform(arr: np.ndarray, quarter_turns: int, hflip: bool) -> np.ndarray:
    out = np.rot90(arr, quarter_turns, axes=(0, 1))
    if hflip:
        out = out[:, ::-1]
    return out


def apply_variant(raster: Raster, v: TtaVariant) -> Raster:
    """Rotate counter-clockwise by the variant's quarter turns, then flip horizontally."""
    return type(raster)(_transform(raster.data, v.rotation_quarter_turns, v.hflip))


def invert_variant(prob: Raster, v: TtaVariant) -> Raster:
    """Exact inverse of apply_variant: unflip, then rotate back."""
    arr = prob.data
    if v.hflip:
        arr = arr[:, ::-1]
    arr = np.rot90(arr, (4 - v.rotation_quarter_turns) % 4, axes=(0, 1))
    return type(prob)(arr)


def tta_predict(
    predict: Callable[[ImageBuffer], ProbMask],
    image: ImageBuffer,
    variants: Sequence[TtaVariant] | None = None,
) -> ProbMask:
    """Predict on transformed copies of the image and average the restored maps.

    ``variants`` defaults to all 8 dihedral variants. The predictor must return
    a probability mask matching the transformed image's dimensions.
    """
    variants = ALL_VARIANTS if variants is None else tuple(variants)
    if not variants:
        raise ValueError("variant list must be non-empty")
    restored = []
    for v in sorted(variants):
        transformed = apply_variant(image, v)
        prob = predict(transformed)
        if (prob.height, prob.width) != (transformed.height, transformed.width):
            raise ValueError(
                f"predictor returned a {prob.height}x{prob.width} map for variant "
                f"{v}, expected {transformed.height}x{transformed.width}"
            )
        restored.append(invert_variant(prob, v).data)
    return ProbMask(pairwise_mean(np.stack(restored)))


@dataclass(frozen=True)
class AugmentationConfig:
    """Stochastic training augmentations: scaling, quarter-turn rotations, flips,
    and brightness/contrast shifts."""

    scale_limit: float = 0.1
    scale_prob: float = 0.3
    rot90_prob: float = 0.5
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    brightness_contrast_limit: float = 0.15
    brightness_contrast_prob: float = 0.4
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("scale_prob", "rot90_prob", "hflip_prob", "vflip_prob",
                     "brightness_contrast_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.scale_limit < 0 or self.brightness_contrast_limit < 0:
            raise ValueError("augmentation limits must be non-negative")


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with edge clamping (half-pixel centre alignment)."""
    in_h, in_w = arr.shape[:2]
    rows = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)
    fr = (rows - r0).reshape(-1, 1)
    fc = (cols - c0).reshape(1, -1)
    if arr.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    a = arr[np.ix_(r0, c0)]
    b = arr[np.ix_(r0, c1)]
    c = arr[np.ix_(r1, c0)]
    d = arr[np.ix_(r1, c1)]
    top = a * (1 - fc) + b * fc
    bottom = c * (1 - fc) + d * fc
    return top * (1 - fr) + bottom * fr


def resize_nearest(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resampling; keeps masks strictly binary."""
    in_h, in_w = arr.shape[:2]
    rows = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    r = np.floor(rows + 0.5).astype(np.intp)
    c = np.floor(cols + 0.5).astype(np.intp)
    return arr[np.ix_(r, c)]


def _center_fit(arr: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Centre-crop or centre-pad (with zeros/background) to the target size."""
    h, w = arr.shape[:2]
    if h > target_h:
        top = (h - target_h) // 2
        arr = arr[top : top + target_h]
    if w > target_w:
        left = (w - target_w) // 2
        arr = arr[:, left : left + target_w]
    h, w = arr.shape[:2]
    if h < target_h or w < target_w:
        pad_top = (target_h - h) // 2
        pad_left = (target_w - w) // 2
        pad = [(pad_top, target_h - h - pad_top), (pad_left, target_w - w - pad_left)]
        pad += [(0, 0)] * (arr.ndim - 2)
        arr = np.pad(arr, pad, mode="constant")
    return arr


def augment(
    image: ImageBuffer,
    mask: BinaryMask,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
) -> tuple[ImageBuffer, BinaryMask]:
    """Apply one random augmentation draw to an image/mask pair.

    Geometric transforms hit both rasters (bilinear for the image, nearest for
    the mask); photometric shifts hit the image only. Draw order is fixed:
    scale, rot90, hflip, vflip, brightness/contrast. The generator's state is
    advanced in place; seeding it identically reproduces the outputs exactly.
    """
    if (image.height, image.width) != (mask.height, mask.width):
        raise ValueError(
            f"image is {image.height}x{image.width} but mask is {mask.height}x{mask.width}"
        )
    img = image.data.astype(np.float64)
    msk = mask.data

    if rng.random() < cfg.scale_prob:
        s = rng.uniform(-cfg.scale_limit, cfg.scale_limit)
        new_h = max(1, round(image.height * (1.0 + s)))
        new_w = max(1, round(image.width * (1.0 + s)))
        img = _center_fit(resize_bilinear(img, new_h, new_w), image.height, image.width)
        msk = _center_fit(resize_nearest(msk, new_h, new_w), mask.height, mask.width)

    if rng.random() < cfg.rot90_prob:
        k = int(rng.integers(0, 4))
        img = np.rot90(img, k, axes=(0, 1))
        msk = np.rot90(msk, k, axes=(0, 1))

    if rng.random() < cfg.hflip_prob:
        img = img[:, ::-1]
        msk = msk[:, ::-1]

    if rng.random() < cfg.vflip_prob:
        img = img[::-1]
        msk = msk[::-1]

    if rng.random() < cfg.brightness_contrast_prob:
        b = rng.uniform(-cfg.brightness_contrast_limit, cfg.brightness_contrast_limit)
        c = rng.uniform(-cfg.brightness_contrast_limit, cfg.brightness_contrast_limit)
        img = (img - 128.0) * (1.0 + c) + 128.0 + 255.0 * b

    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return ImageBuffer(img), BinaryMask(msk)
