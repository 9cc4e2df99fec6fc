"""End-to-end inference: per-family fold ensembling, cross-family fusion, and
post-processing, with per-image failure isolation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .dataset import DatasetIndex, DatasetRecord
from .ensemble import EnsembleSpec, average_probmasks, fold_ensemble_predict, fuse_models
from .geometry import TtaVariant
from .postprocess import PostprocessConfig, postprocess
from .rasters import BinaryMask, ProbMask


@dataclass(frozen=True)
class InferenceResult:
    """Fused probability maps and final masks per image id, plus per-id failures."""

    prob_masks: dict[str, ProbMask]
    masks: dict[str, BinaryMask]
    failures: dict[str, str]


def _infer_one(
    record: DatasetRecord,
    families: Sequence[EnsembleSpec],
    tta_variants: Sequence[TtaVariant] | None,
    post_cfg: PostprocessConfig,
) -> tuple[ProbMask, BinaryMask]:
    probs = [
        fold_ensemble_predict(
            family.members,
            record.image,
            tta_variants=tta_variants,
            weights=family.weights,
            image_id=record.image_id,
        )
        for family in families
    ]
    if len(probs) == 1:
        fused = probs[0]
    elif len(probs) == 2:
        fused = fuse_models(probs[0], probs[1])
    else:
        fused = average_probmasks(probs)
    return fused, postprocess(fused, post_cfg)


def run_inference(
    index: DatasetIndex,
    families: Sequence[EnsembleSpec],
    tta_variants: Sequence[TtaVariant] | None,
    post_cfg: PostprocessConfig,
    workers: int = 1,
) -> InferenceResult:
    """Run the full inference flow over every indexed image.

    Per-image predictor failures are recorded and skipped; the run continues.
    Results are assembled in id order regardless of worker completion order.
    """
    if not families:
        raise ValueError("need at least one predictor family")
    families = list(families)

    def work(record: DatasetRecord):
        try:
            return record.image_id, _infer_one(record, families, tta_variants, post_cfg), None
        except Exception as exc:
            return record.image_id, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, index.records))
    else:
        outcomes = [work(r) for r in index.records]

    prob_masks: dict[str, ProbMask] = {}
    masks: dict[str, BinaryMask] = {}
    failures: dict[str, str] = {}
    for image_id, result, error in outcomes:
        if error is not None:
            failures[image_id] = error
        else:
            prob_masks[image_id], masks[image_id] = result
    return InferenceResult(prob_masks, masks, failures)
