"""Cross-validation fold splitting, prediction averaging and two-model fusion."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .averaging import pairwise_mean, weighted_mean
from .errors import PredictionError
from .geometry import TtaVariant, tta_predict
from .rasters import ImageBuffer, ProbMask


@dataclass(frozen=True)
class FoldAssignment:
    """A balanced partition of n_items into k folds."""

    n_items: int
    k: int
    assignment: np.ndarray = field(repr=False)  # per-item fold index in [0, k)

    def __post_init__(self):
        arr = np.asarray(self.assignment, dtype=np.int64)
        if arr.shape != (self.n_items,):
            raise ValueError(f"assignment must have shape ({self.n_items},), got {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValueError("fold indices must lie in [0, k)")
        sizes = np.bincount(arr, minlength=self.k)
        if sizes.size and sizes.max() - sizes.min() > 1:
            raise ValueError(f"fold sizes {sizes.tolist()} differ by more than 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)

    def fold_sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()

    def fold_items(self, fold: int) -> np.ndarray:
        """Indices of the items held out in the given fold."""
        return np.flatnonzero(self.assignment == fold)

    def training_items(self, fold: int) -> np.ndarray:
        """Indices of the items used for training when the given fold is held out."""
        return np.flatnonzero(self.assignment != fold)


def split_folds(n_items: int, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Shuffle items and partition them into k folds of size n//k or n//k + 1.

    Deterministic for a given seed (NumPy PCG64 stream).
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if n_items < k:
        raise ValueError(f"cannot split {n_items} items into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_items)
    assignment = np.empty(n_items, dtype=np.int64)
    base, extra = divmod(n_items, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignment[perm[start : start + size]] = fold
        start += size
    return FoldAssignment(n_items, k, assignment)


def write_fold_table(path, ids: Sequence[str], folds: FoldAssignment) -> None:
    """Persist a fold assignment as a plain-text "id<TAB>fold" table."""
    if len(ids) != folds.n_items:
        raise ValueError(f"{len(ids)} ids for {folds.n_items} assigned items")
    lines = [f"{item}\t{fold}" for item, fold in zip(ids, folds.assignment)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_fold_table(path) -> dict[str, int]:
    """Read an "id<TAB>fold" table back into an id -> fold mapping."""
    mapping: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            item, fold = line.rsplit("\t", 1)
            mapping[item] = int(fold)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed fold table line {line!r}") from None
    return mapping


def _check_same_dims(masks: Sequence[ProbMask]) -> None:
    h, w = masks[0].height, masks[0].width
    for i, m in enumerate(masks):
        if (m.height, m.width) != (h, w):
            raise ValueError(f"mask {i} is {m.height}x{m.width}, expected {h}x{w}")


def average_probmasks(masks: Sequence[ProbMask], weights: Sequence[float] | None = None) -> ProbMask:
    """Pixel-wise (weighted) arithmetic mean of probability masks."""
    masks = list(masks)
    if not masks:
        raise ValueError("cannot average an empty list of masks")
    _check_same_dims(masks)
    stack = np.stack([m.data for m in masks])
    if weights is None:
        return ProbMask(pairwise_mean(stack))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(masks),):
        raise ValueError(f"need {len(masks)} weights, got shape {w.shape}")
    if (w <= 0).any():
        raise ValueError("weights must be positive")
    return ProbMask(weighted_mean(stack, w))


def fuse_models(prob_a: ProbMask, prob_b: ProbMask) -> ProbMask:
    """Fuse two model families' probability maps by plain averaging."""
    _check_same_dims([prob_a, prob_b])
    return ProbMask((prob_a.data + prob_b.data) / 2.0)


@dataclass(frozen=True)
class EnsembleSpec:
    """A family of sub-model predictors averaged at inference time."""

    members: tuple
    weights: tuple[float, ...] | None = None
    name: str = "ensemble"

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member predictor")
        object.__setattr__(self, "members", members)
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(members):
                raise ValueError(f"{len(members)} members but {len(w)} weights")
            if any(x <= 0 for x in w):
                raise ValueError("ensemble weights must be positive")
            object.__setattr__(self, "weights", w)


def fold_ensemble_predict(
    submodels: Sequence,
    image: ImageBuffer,
    tta_variants: Sequence[TtaVariant] | None = None,
    weights: Sequence[float] | None = None,
    image_id: str | None = None,
) -> ProbMask:
    """Average the (optionally TTA-wrapped) predictions of a family's sub-models.

    TTA is applied inside each sub-model before averaging; predictors that are
    keyed by image id rather than content (``supports_tta`` False) are called
    directly. Errors are re-raised with the offending sub-model's index.
    """
    submodels = list(submodels)
    if not submodels:
        raise ValueError("need at least one sub-model")
    probs = []
    for i, model in enumerate(submodels):
        try:
            if tta_variants is not None and getattr(model, "supports_tta", True):
                prob = tta_predict(
                    lambda im: model.predict(im, image_id=image_id), image, tta_variants
                )
            else:
                prob = model.predict(image, image_id=image_id)
        except Exception as exc:
            name = getattr(model, "name", type(model).__name__)
            raise PredictionError(f"sub-model {i} ({name}) failed: {exc}") from exc
        probs.append(prob)
    return average_probmasks(probs, weights)
