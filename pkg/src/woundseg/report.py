"""Evaluation reports: per-image counts, aggregate scores, failure buckets,
and their JSON/CSV/console renderings."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import DatasetIndex
from .errors import DataError
from .metrics import ConfusionCounts, MetricSet, compute_metric_set, confusion_counts
from .rasters import BinaryMask

#: Per-image Dice below this value lands an image in the "poor" bucket.
POOR_DICE_THRESHOLD = 0.60

CAUSE_FALSE_POSITIVE = "false-positive-on-empty-gt"
CAUSE_MISSED_LESION = "missed-lesion"
CAUSE_DISJOINT = "disjoint"


@dataclass(frozen=True)
class PerImageResult:
    image_id: str
    counts: ConfusionCounts
    dice: float


@dataclass(frozen=True)
class FailureBuckets:
    """Ids with poor overlap (0 < Dice < 0.6) and zero-Dice ids tagged by cause."""

    poor: tuple[str, ...]
    zero: tuple[tuple[str, str], ...]  # (image_id, cause)


def _zero_dice_cause(c: ConfusionCounts) -> str:
    gt_empty = c.tp + c.fn == 0
    pred_empty = c.tp + c.fp == 0
    if gt_empty and not pred_empty:
        return CAUSE_FALSE_POSITIVE
    if pred_empty and not gt_empty:
        return CAUSE_MISSED_LESION
    return CAUSE_DISJOINT


def _bucket(per_image: list[PerImageResult]) -> FailureBuckets:
    poor = []
    zero = []
    for r in per_image:
        if r.dice == 0.0:
            zero.append((r.image_id, _zero_dice_cause(r.counts)))
        elif r.dice < POOR_DICE_THRESHOLD:
            poor.append(r.image_id)
    return FailureBuckets(tuple(poor), tuple(zero))


@dataclass(frozen=True)
class EvaluationReport:
    per_image: tuple[PerImageResult, ...]
    aggregate: MetricSet
    buckets: FailureBuckets
    config_echo: dict
    missing_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config_echo,
            "n_images": self.aggregate.n_images,
            "aggregate": {
                "precision": self.aggregate.precision,
                "recall": self.aggregate.recall,
                "dice_data": self.aggregate.dice_data,
                "iou_data": self.aggregate.iou_data,
                "dice_image": self.aggregate.dice_image,
            },
            "per_image": [
                {
                    "id": r.image_id,
                    "tp": r.counts.tp,
                    "fp": r.counts.fp,
                    "fn": r.counts.fn,
                    "tn": r.counts.tn,
                    "dice": r.dice,
                }
                for r in self.per_image
            ],
            "failure_buckets": {
                "poor": list(self.buckets.poor),
                "zero": [{"id": i, "cause": c} for i, c in self.buckets.zero],
            },
            "missing_ids": list(self.missing_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def save_csv(self, path) -> None:
        """Per-image delimited table."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "tp", "fp", "fn", "tn", "dice"])
            for r in self.per_image:
                writer.writerow(
                    [r.image_id, r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn, repr(r.dice)]
                )

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        """Load a stored report and verify its aggregates against the embedded
        per-image counts."""
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read report {path}: {exc}") from exc
        try:
            per_image = tuple(
                PerImageResult(
                    row["id"],
                    ConfusionCounts(row["tp"], row["fp"], row["fn"], row["tn"]),
                    row["dice"],
                )
                for row in payload["per_image"]
            )
            stored = payload["aggregate"]
            buckets = FailureBuckets(
                tuple(payload["failure_buckets"]["poor"]),
                tuple((e["id"], e["cause"]) for e in payload["failure_buckets"]["zero"]),
            )
            report = cls(
                per_image=per_image,
                aggregate=compute_metric_set([r.counts for r in per_image]),
                buckets=buckets,
                config_echo=payload["config"],
                missing_ids=tuple(payload["missing_ids"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"report {path} is malformed: {exc}") from exc
        recomputed = report.aggregate
        for key in ("precision", "recall", "dice_data", "iou_data", "dice_image"):
            if getattr(recomputed, key) != stored.get(key):
                raise DataError(
                    f"report {path} is inconsistent: stored {key}={stored.get(key)!r} "
                    f"but per-image counts give {getattr(recomputed, key)!r}"
                )
        return report

    def format_table(self, label: str = "evaluated") -> str:
        """Console table with the five metric columns (percentages, 2 decimals)."""
        headers = [
            "run",
            "images",
            "image-based Dice [%]",
            "precision [%]",
            "recall [%]",
            "data-based IoU [%]",
            "data-based Dice [%]",
        ]
        a = self.aggregate
        row = [
            label,
            str(a.n_images),
            _pct(a.dice_image),
            _pct(a.precision),
            _pct(a.recall),
            _pct(a.iou_data),
            _pct(a.dice_data),
        ]
        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
            "  ".join(v.ljust(w) for v, w in zip(row, widths)),
        ]
        zero = self.buckets.zero
        lines.append(
            f"failure buckets: {len(self.buckets.poor)} poor (0 < Dice < "
            f"{POOR_DICE_THRESHOLD:.2f}), {len(zero)} zero Dice"
        )
        for image_id, cause in zero:
            lines.append(f"  zero Dice: {image_id} ({cause})")
        for image_id in self.buckets.poor:
            lines.append(f"  poor:      {image_id}")
        if self.missing_ids:
            lines.append(
                "missing predictions scored as empty masks: " + ", ".join(self.missing_ids)
            )
        return "\n".join(lines)


def _pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100.0:.2f}"


def evaluate(
    predictions: Mapping[str, BinaryMask],
    index: DatasetIndex,
    config_echo: dict | None = None,
    allow_missing: bool = False,
) -> EvaluationReport:
    """Score predicted masks against the index's ground truth.

    Every indexed image must have ground truth. Ids without a prediction abort
    the evaluation unless allow_missing is set, in which case they are scored
    as empty predictions and listed in the report.
    """
    for record in index.records:
        if record.gt is None:
            raise DataError(f"id {record.image_id!r} has no ground-truth mask")
    missing = [r.image_id for r in index.records if r.image_id not in predictions]
    if missing and not allow_missing:
        raise DataError(
            "missing predictions for ids: " + ", ".join(missing)
            + " (use allow_missing to score them as empty masks)"
        )
    per_image = []
    for record in index.records:
        pred = predictions.get(record.image_id)
        if pred is None:
            pred = BinaryMask(np.zeros((record.gt.height, record.gt.width), dtype=bool))
        counts = confusion_counts(pred, record.gt)
        per_image.append(PerImageResult(record.image_id, counts, counts.dice()))
    return EvaluationReport(
        per_image=tuple(per_image),
        aggregate=compute_metric_set([r.counts for r in per_image]),
        buckets=_bucket(per_image),
        config_echo=dict(config_echo or {}),
        missing_ids=tuple(missing),
    )
