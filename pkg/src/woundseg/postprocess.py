"""Probability-map to final-mask conversion: threshold, fill holes, drop specks.

Connectivity conventions: foreground components use the configured
connectivity (8 by default); hole filling labels the background with the dual
connectivity (4 when foreground is 8, and vice versa) to avoid the usual
topological paradoxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .rasters import BinaryMask, ProbMask

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class PostprocessConfig:
    """Post-processing knobs. min_object_area defaults to 100 pixels, sized for
    512x512 canvases; set it explicitly when working at other resolutions."""

    threshold: float = 0.5
    min_object_area: int = 100
    connectivity: int = 8

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie strictly inside (0, 1), got {self.threshold}")
        if self.min_object_area < 0:
            raise ValueError("min_object_area must be non-negative")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass(frozen=True)
class LabelMap:
    """Connected-component labels, 0 = background, components numbered 1..n."""

    labels: np.ndarray = field(repr=False)
    n_components: int = 0

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int32)
        if arr.ndim != 2:
            raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
        nonzero = np.unique(arr[arr != 0])
        if not np.array_equal(nonzero, np.arange(1, self.n_components + 1)):
            raise ValueError(
                f"labels must be contiguous 1..{self.n_components}, found {nonzero.tolist()}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def component_areas(self) -> np.ndarray:
        """Pixel area per component, index 0 unused (background)."""
        return np.bincount(self.labels.ravel(), minlength=self.n_components + 1)


def binarize(prob: ProbMask, threshold: float = 0.5) -> BinaryMask:
    """Threshold a probability map; ties at the threshold become foreground."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie strictly inside (0, 1), got {threshold}")
    return BinaryMask(prob.data >= threshold)


def connected_components(mask: BinaryMask, connectivity: int = 8) -> LabelMap:
    """Label foreground components, numbered by raster-scan order of first pixel."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    raw, n = ndimage.label(mask.data, structure=_STRUCTURES[connectivity])
    if n == 0:
        return LabelMap(np.zeros(mask.data.shape, dtype=np.int32), 0)
    # scipy's label order is an implementation detail; renumber by first pixel
    values, first_index = np.unique(raw.ravel(), return_index=True)
    nonzero = values != 0
    values, first_index = values[nonzero], first_index[nonzero]
    lut = np.zeros(n + 1, dtype=np.int32)
    lut[values[np.argsort(first_index, kind="stable")]] = np.arange(1, n + 1)
    return LabelMap(lut[raw], n)


def fill_holes(mask: BinaryMask, connectivity: int = 8) -> BinaryMask:
    """Turn background components not connected to the raster border into foreground."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    background_connectivity = 4 if connectivity == 8 else 8
    bg = ~mask.data
    bg_labels, n = ndimage.label(bg, structure=_STRUCTURES[background_connectivity])
    if n == 0:
        return mask
    border = np.zeros(bg.shape, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    open_labels = np.unique(bg_labels[border & bg])
    holes = bg & ~np.isin(bg_labels, open_labels)
    return BinaryMask(mask.data | holes)


def remove_small_objects(mask: BinaryMask, min_area: int, connectivity: int = 8) -> BinaryMask:
    """Delete foreground components with area strictly below min_area."""
    if min_area < 0:
        raise ValueError("min_area must be non-negative")
    if min_area == 0:
        return mask
    label_map = connected_components(mask, connectivity)
    if label_map.n_components == 0:
        return mask
    keep = label_map.component_areas() >= min_area
    keep[0] = False
    return BinaryMask(keep[label_map.labels])


def postprocess(prob: ProbMask, cfg: PostprocessConfig) -> BinaryMask:
    """Threshold, fill holes, then remove small objects, in that order."""
    mask = binarize(prob, cfg.threshold)
    mask = fill_holes(mask, cfg.connectivity)
    return remove_small_objects(mask, cfg.min_object_area, cfg.connectivity)
