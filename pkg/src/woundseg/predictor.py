"""Predictor abstraction, a trainable per-pixel toy classifier, and a
file-backed predictor that serves externally produced probability maps.

The toy model is a logistic regression over five handcrafted pixel features
(R, G, B, 3x3 local mean, 3x3 local std). It trains in seconds and exercises
the full loss/schedule/augmentation/cross-validation plumbing; it makes no
claim of approaching CNN segmentation accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.special import expit

from .errors import DataError
from .geometry import AugmentationConfig, augment
from .metrics import LossConfig, combined_loss, combined_loss_grad, confusion_counts, dice_data
from .pngio import load_prob_map
from .postprocess import binarize
from .rasters import BinaryMask, ImageBuffer, ProbMask

FEATURE_COUNT = 5


class Predictor:
    """Anything that maps an image (and optionally its id) to a probability mask."""

    name: str = "predictor"
    #: False for predictors keyed by image id rather than content; TTA is
    #: skipped for those since transformed inputs would not change the output.
    supports_tta: bool = True

    def predict(self, image: ImageBuffer, image_id: str | None = None) -> ProbMask:
        raise NotImplementedError


class ConstantPredictor(Predictor):
    """Returns a constant probability everywhere; useful for tests and baselines."""

    def __init__(self, value: float, name: str = "constant"):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"constant probability must lie in [0, 1], got {value}")
        self.value = float(value)
        self.name = name

    def predict(self, image: ImageBuffer, image_id: str | None = None) -> ProbMask:
        return ProbMask(np.full((image.height, image.width), self.value))


@dataclass(frozen=True)
class TrainingSchedule:
    """Epoch count, stepwise learning-rate decay and batch size."""

    epochs: int = 80
    initial_lr: float = 0.001
    decay_every: int = 25
    decay_factor: float = 0.1
    batch_size: int = 4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")
        if self.decay_every < 1:
            raise ValueError("decay_every must be at least 1")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError("decay_factor must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


def lr_at(schedule: TrainingSchedule, epoch: int) -> float:
    """Learning rate for an epoch: initial_lr * decay_factor^(epoch // decay_every)."""
    if not 0 <= epoch < schedule.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.epochs})")
    k = epoch // schedule.decay_every
    # dividing by the reciprocal power keeps decimal ladders such as
    # 1e-3 -> 1e-4 -> 1e-5 exact in binary floating point
    return schedule.initial_lr / (1.0 / schedule.decay_factor) ** k


def extract_features(image: ImageBuffer) -> np.ndarray:
    """Per-pixel feature vectors of shape (H, W, 5), all values in [0, 1].

    Features: R, G, B scaled to [0, 1], plus 3x3 local mean and local std of
    the grayscale intensity. Borders use clamped-edge neighbourhoods.
    """
    rgb = image.data.astype(np.float64) / 255.0
    gray = rgb.mean(axis=2)
    local_mean = uniform_filter(gray, size=3, mode="nearest")
    local_sq = uniform_filter(gray * gray, size=3, mode="nearest")
    local_std = np.sqrt(np.clip(local_sq - local_mean * local_mean, 0.0, None))
    return np.stack([rgb[..., 0], rgb[..., 1], rgb[..., 2], local_mean, local_std], axis=-1)


@dataclass(frozen=True)
class ToyModel:
    """Logistic pixel classifier: sigmoid(features . weights[:5] + weights[5])."""

    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=np.float64)
        if arr.shape != (FEATURE_COUNT + 1,):
            raise ValueError(f"weights must have shape ({FEATURE_COUNT + 1},), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("weights must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"weights": self.weights.tolist()}, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ToyModel":
        try:
            payload = json.loads(Path(path).read_text())
            return cls(np.asarray(payload["weights"], dtype=np.float64))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot load toy model from {path}: {exc}") from exc


def predict_toy(model: ToyModel, image: ImageBuffer) -> ProbMask:
    """Sigmoid of the per-pixel linear score."""
    feats = extract_features(image)
    z = feats @ model.weights[:FEATURE_COUNT] + model.weights[FEATURE_COUNT]
    return ProbMask(expit(z))


class ToyPredictor(Predictor):
    def __init__(self, model: ToyModel, name: str = "toy"):
        self.model = model
        self.name = name

    def predict(self, image: ImageBuffer, image_id: str | None = None) -> ProbMask:
        return predict_toy(self.model, image)


@dataclass(frozen=True)
class ToyTrainResult:
    """Best checkpoint plus the training trace needed to audit a run."""

    model: ToyModel
    best_epoch: int
    best_val_dice: float
    val_dice_history: tuple[float, ...]
    steps_taken: int


def _validation_dice(weights: np.ndarray, val_pairs) -> float:
    model = ToyModel(weights)
    counts = [
        confusion_counts(binarize(predict_toy(model, img), 0.5), gt) for img, gt in val_pairs
    ]
    score = dice_data(counts)
    # undefined (no foreground anywhere, none predicted) ranks below any real score
    return -1.0 if score is None else score


def train_toy(
    train_pairs: Sequence[tuple[ImageBuffer, BinaryMask]],
    val_pairs: Sequence[tuple[ImageBuffer, BinaryMask]],
    schedule: TrainingSchedule,
    loss_cfg: LossConfig,
    aug_cfg: AugmentationConfig,
    seed=0,
) -> ToyTrainResult:
    """Fit the toy pixel classifier with Adam on the combined loss.

    Augmentation is re-drawn every time an image is visited. The checkpoint
    with the highest validation data-based Dice is returned; everything is
    deterministic for a given seed.
    """
    train_pairs = list(train_pairs)
    val_pairs = list(val_pairs)
    if not train_pairs or not val_pairs:
        raise ValueError("need non-empty training and validation sets")

    rng = np.random.default_rng(seed)
    w = np.zeros(FEATURE_COUNT + 1)
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    t = 0
    steps = 0
    best_w = w.copy()
    best_dice = _validation_dice(w, val_pairs)
    best_epoch = -1
    history = []

    for epoch in range(schedule.epochs):
        lr = lr_at(schedule, epoch)
        order = rng.permutation(len(train_pairs))
        for start in range(0, len(order), schedule.batch_size):
            batch = order[start : start + schedule.batch_size]
            grad = np.zeros_like(w)
            for idx in batch:
                img, gt = augment(*train_pairs[idx], aug_cfg, rng)
                feats = extract_features(img)
                z = feats @ w[:FEATURE_COUNT] + w[FEATURE_COUNT]
                p = expit(z)
                prob = ProbMask(p)
                loss = combined_loss(prob, gt, loss_cfg)
                if not np.isfinite(loss):
                    raise RuntimeError(f"training diverged at epoch {epoch}: non-finite loss")
                dz = combined_loss_grad(prob, gt, loss_cfg) * p * (1.0 - p)
                grad[:FEATURE_COUNT] += np.tensordot(dz, feats, axes=([0, 1], [0, 1]))
                grad[FEATURE_COUNT] += dz.sum()
            grad /= len(batch)
            t += 1
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad * grad
            m_hat = m / (1.0 - beta1**t)
            v_hat = v / (1.0 - beta2**t)
            w = w - lr * m_hat / (np.sqrt(v_hat) + adam_eps)
            steps += 1
        val = _validation_dice(w, val_pairs)
        history.append(val)
        if val > best_dice:
            best_dice = val
            best_w = w.copy()
            best_epoch = epoch

    return ToyTrainResult(
        model=ToyModel(best_w),
        best_epoch=best_epoch,
        best_val_dice=best_dice,
        val_dice_history=tuple(history),
        steps_taken=steps,
    )


class FilePredictor(Predictor):
    """Serves pre-computed probability maps, one grayscale file per image id."""

    supports_tta = False

    def __init__(self, directory, ids: Sequence[str], name: str | None = None):
        self.directory = Path(directory)
        self.name = name if name is not None else self.directory.name
        if not self.directory.is_dir():
            raise DataError(f"probability-map directory {self.directory} does not exist")
        self._paths: dict[str, Path] = {}
        missing = []
        for image_id in ids:
            matches = sorted(self.directory.glob(f"{image_id}.*"))
            if not matches:
                missing.append(image_id)
            else:
                self._paths[image_id] = matches[0]
        if missing:
            raise DataError(
                f"probability maps missing under {self.directory} for ids: "
                + ", ".join(missing)
            )

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._paths)

    def predict(self, image: ImageBuffer, image_id: str | None = None) -> ProbMask:
        if image_id is None:
            raise DataError(f"file-backed predictor {self.name!r} needs an image id")
        path = self._paths.get(image_id)
        if path is None:
            raise DataError(f"no stored probability map for id {image_id!r} under {self.directory}")
        prob = load_prob_map(path)
        if (prob.height, prob.width) != (image.height, image.width):
            raise DataError(
                f"stored map {path} is {prob.height}x{prob.width} but image "
                f"{image_id!r} is {image.height}x{image.width}"
            )
        return prob


def load_file_predictor(directory, manifest, name: str | None = None) -> FilePredictor:
    """Build a file-backed predictor from a directory of maps and a manifest.

    The manifest is a plain-text file with one image id per line.
    """
    manifest = Path(manifest)
    try:
        ids = [line.strip() for line in manifest.read_text().splitlines() if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read manifest {manifest}: {exc}") from exc
    if not ids:
        raise DataError(f"manifest {manifest} lists no image ids")
    return FilePredictor(directory, ids, name=name)
