"""Confusion counting, segmentation scores, and training losses.

The four data-based scores (precision, recall, Dice, IoU) sum TP/FP/FN over
all images before forming the ratio; the image-based Dice averages per-image
Dice scores instead, which penalises small-lesion failures much harder.

Degenerate denominators are reported as None ("undefined") rather than NaN so
reports can distinguish "no positives anywhere" from an actual score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rasters import BinaryMask, ProbMask

#: Probabilities are clamped to [EPS, 1 - EPS] inside the focal loss.
FOCAL_EPS = 1e-7


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-image TP/FP/FN/TN pixel tallies."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def dice(self) -> float:
        """Per-image Dice. An empty prediction of an empty ground truth is a
        correct prediction and scores 1.0."""
        denom = 2 * self.tp + self.fp + self.fn
        if denom == 0:
            return 1.0
        return 2 * self.tp / denom


def confusion_counts(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    """Exact integer pixel tallies for one image."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError(
            f"prediction is {pred.height}x{pred.width} but ground truth is "
            f"{gt.height}x{gt.width}"
        )
    p, g = pred.data, gt.data
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def _sums(counts: Sequence[ConfusionCounts]) -> tuple[int, int, int]:
    if not counts:
        raise ValueError("need at least one image's counts")
    tp = sum(c.tp for c in counts)
    fp = sum(c.fp for c in counts)
    fn = sum(c.fn for c in counts)
    return tp, fp, fn


def precision(counts: Sequence[ConfusionCounts]) -> float | None:
    """Sum(TP) / (Sum(TP) + Sum(FP)); None when nothing was predicted foreground."""
    tp, fp, _ = _sums(counts)
    return None if tp + fp == 0 else tp / (tp + fp)


def recall(counts: Sequence[ConfusionCounts]) -> float | None:
    """Sum(TP) / (Sum(TP) + Sum(FN)); None when no ground-truth foreground exists."""
    tp, _, fn = _sums(counts)
    return None if tp + fn == 0 else tp / (tp + fn)


def dice_data(counts: Sequence[ConfusionCounts]) -> float | None:
    """Data-based Dice: Sum(2TP) / (Sum(2TP) + Sum(FP) + Sum(FN))."""
    tp, fp, fn = _sums(counts)
    denom = 2 * tp + fp + fn
    return None if denom == 0 else 2 * tp / denom


def iou_data(counts: Sequence[ConfusionCounts]) -> float | None:
    """Data-based IoU: Sum(TP) / (Sum(TP) + Sum(FP) + Sum(FN))."""
    tp, fp, fn = _sums(counts)
    denom = tp + fp + fn
    return None if denom == 0 else tp / denom


def dice_image(counts: Sequence[ConfusionCounts]) -> float:
    """Image-based Dice: mean of per-image Dice scores."""
    if not counts:
        raise ValueError("need at least one image's counts")
    return sum(c.dice() for c in counts) / len(counts)


@dataclass(frozen=True)
class MetricSet:
    """The five evaluation scores for a batch of images."""

    precision: float | None
    recall: float | None
    dice_data: float | None
    iou_data: float | None
    dice_image: float
    n_images: int


def compute_metric_set(counts: Sequence[ConfusionCounts]) -> MetricSet:
    return MetricSet(
        precision=precision(counts),
        recall=recall(counts),
        dice_data=dice_data(counts),
        iou_data=iou_data(counts),
        dice_image=dice_image(counts),
        n_images=len(counts),
    )


@dataclass(frozen=True)
class LossConfig:
    """Weights and parameters of the combined Dice + focal training loss."""

    dice_weight: float = 0.5
    focal_weight: float = 0.5
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    dice_smooth: float = 1.0

    def __post_init__(self):
        if self.dice_weight < 0 or self.focal_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.focal_gamma < 0:
            raise ValueError("focal gamma must be non-negative")
        if not 0.0 <= self.focal_alpha <= 1.0:
            raise ValueError("focal alpha must lie in [0, 1]")
        if self.dice_smooth <= 0:
            raise ValueError("dice smoothing constant must be positive")


def _check_loss_dims(prob: ProbMask, gt: BinaryMask) -> None:
    if (prob.height, prob.width) != (gt.height, gt.width):
        raise ValueError(
            f"probabilities are {prob.height}x{prob.width} but ground truth is "
            f"{gt.height}x{gt.width}"
        )


def dice_loss(prob: ProbMask, gt: BinaryMask, smooth: float = 1.0) -> float:
    """Soft Dice loss: 1 - (2*Sum(p*g) + smooth) / (Sum(p) + Sum(g) + smooth)."""
    _check_loss_dims(prob, gt)
    p = prob.data
    g = gt.data.astype(np.float64)
    num = 2.0 * float((p * g).sum()) + smooth
    den = float(p.sum()) + float(g.sum()) + smooth
    return 1.0 - num / den


def dice_loss_grad(prob: ProbMask, gt: BinaryMask, smooth: float = 1.0) -> np.ndarray:
    """Per-pixel derivative of dice_loss with respect to each probability."""
    _check_loss_dims(prob, gt)
    p = prob.data
    g = gt.data.astype(np.float64)
    num = 2.0 * float((p * g).sum()) + smooth
    den = float(p.sum()) + float(g.sum()) + smooth
    return (num - 2.0 * g * den) / (den * den)


def _focal_terms(p: np.ndarray, g: np.ndarray, alpha: float):
    pt = np.where(g, p, 1.0 - p)
    at = np.where(g, alpha, 1.0 - alpha)
    return pt, at


def focal_loss(prob: ProbMask, gt: BinaryMask, gamma: float = 2.0, alpha: float = 0.25) -> float:
    """Mean of -alpha_t * (1 - p_t)^gamma * log(p_t) over pixels.

    p_t is the predicted probability of the true class; probabilities are
    clamped to [FOCAL_EPS, 1 - FOCAL_EPS] before the log.
    """
    _check_loss_dims(prob, gt)
    p = np.clip(prob.data, FOCAL_EPS, 1.0 - FOCAL_EPS)
    pt, at = _focal_terms(p, gt.data, alpha)
    return float(np.mean(-at * (1.0 - pt) ** gamma * np.log(pt)))


def focal_loss_grad(
    prob: ProbMask, gt: BinaryMask, gamma: float = 2.0, alpha: float = 0.25
) -> np.ndarray:
    """Per-pixel derivative of focal_loss with respect to each probability.

    Zero where the clamp is active, matching the loss being locally constant
    there.
    """
    _check_loss_dims(prob, gt)
    raw = prob.data
    p = np.clip(raw, FOCAL_EPS, 1.0 - FOCAL_EPS)
    g = gt.data
    pt, at = _focal_terms(p, g, alpha)
    one_minus = 1.0 - pt
    if gamma == 0.0:
        d_pt = -at / pt
    else:
        d_pt = -at * (-gamma * one_minus ** (gamma - 1.0) * np.log(pt) + one_minus**gamma / pt)
    dpt_dp = np.where(g, 1.0, -1.0)
    grad = d_pt * dpt_dp / raw.size
    grad[(raw < FOCAL_EPS) | (raw > 1.0 - FOCAL_EPS)] = 0.0
    return grad


def combined_loss(prob: ProbMask, gt: BinaryMask, cfg: LossConfig) -> float:
    """dice_weight * dice_loss + focal_weight * focal_loss."""
    return cfg.dice_weight * dice_loss(prob, gt, cfg.dice_smooth) + cfg.focal_weight * focal_loss(
        prob, gt, cfg.focal_gamma, cfg.focal_alpha
    )


def combined_loss_grad(prob: ProbMask, gt: BinaryMask, cfg: LossConfig) -> np.ndarray:
    """Per-pixel derivative of combined_loss with respect to each probability."""
    return cfg.dice_weight * dice_loss_grad(prob, gt, cfg.dice_smooth) + (
        cfg.focal_weight * focal_loss_grad(prob, gt, cfg.focal_gamma, cfg.focal_alpha)
    )
