"""Core raster types (clinical image, probability mask, binary mask) and zero-padding.

All three types are thin immutable wrappers around numpy arrays. Validation
happens once, at construction; after that the backing array is locked
(non-writeable) so instances can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _lock(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """An H x W x 3 clinical photo with uint8 intensities."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"image must have shape (H, W, 3), got {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer):
                if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
                    raise ValueError("image intensities must lie in [0, 255]")
                arr = arr.astype(np.uint8)
            else:
                raise ValueError(f"image intensities must be integers, got dtype {arr.dtype}")
        object.__setattr__(self, "data", _lock(arr.copy()))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_values(cls, height: int, width: int, values) -> "ImageBuffer":
        """Build from a flat row-major sequence of H*W*3 intensities."""
        arr = np.asarray(values)
        if arr.size != height * width * 3:
            raise ValueError(
                f"expected {height * width * 3} values for a {height}x{width}x3 image, got {arr.size}"
            )
        return cls(arr.reshape(height, width, 3))


@dataclass(frozen=True)
class ProbMask:
    """An H x W map of per-pixel foreground probabilities in [0, 1]."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"probability mask must be 2-D, got shape {arr.shape}")
        bad = ~((arr >= 0.0) & (arr <= 1.0))
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"probability {arr.flat[idx]!r} at flat index {idx} is outside [0, 1]"
            )
        object.__setattr__(self, "data", _lock(arr.copy()))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_values(cls, height: int, width: int, values) -> "ProbMask":
        """Build from a flat row-major sequence of H*W probabilities."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != height * width:
            raise ValueError(
                f"expected {height * width} values for a {height}x{width} mask, got {arr.size}"
            )
        return cls(arr.reshape(height, width))


@dataclass(frozen=True)
class BinaryMask:
    """An H x W foreground/background raster (ground truth or final prediction)."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"binary mask must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("binary mask values must be 0/1 or boolean")
            arr = arr.astype(bool)
        object.__setattr__(self, "data", _lock(arr.copy()))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def foreground_area(self) -> int:
        return int(self.data.sum())

    @classmethod
    def from_values(cls, height: int, width: int, values) -> "BinaryMask":
        """Build from a flat row-major sequence of H*W truthy/falsy values."""
        arr = np.asarray(values)
        if arr.size != height * width:
            raise ValueError(
                f"expected {height * width} values for a {height}x{width} mask, got {arr.size}"
            )
        return cls(arr.reshape(height, width))


def new_prob_mask(height: int, width: int, values) -> ProbMask:
    """Validated ProbMask constructor from a flat value sequence."""
    return ProbMask.from_values(height, width, values)


def _check_pad_target(height: int, width: int, target_h: int, target_w: int) -> None:
    if target_h < height or target_w < width:
        raise ValueError(
            f"pad target {target_h}x{target_w} is smaller than source {height}x{width}"
        )


def zero_pad(image: ImageBuffer, target_h: int, target_w: int) -> ImageBuffer:
    """Pad an image to target_h x target_w with zero intensities.

    Original content is anchored at the top-left corner (row 0, col 0), which
    makes the operation trivially invertible by cropping.
    """
    _check_pad_target(image.height, image.width, target_h, target_w)
    out = np.zeros((target_h, target_w, 3), dtype=np.uint8)
    out[: image.height, : image.width] = image.data
    return ImageBuffer(out)


def zero_pad_mask(mask: BinaryMask, target_h: int, target_w: int) -> BinaryMask:
    """Pad a binary mask to target_h x target_w with background, top-left anchored."""
    _check_pad_target(mask.height, mask.width, target_h, target_w)
    out = np.zeros((target_h, target_w), dtype=bool)
    out[: mask.height, : mask.width] = mask.data
    return BinaryMask(out)
