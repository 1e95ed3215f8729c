"""Prediction scoring against annotations in original image coordinates.

Per image, predicted polygons are matched to ground-truth instances greedily
by descending raster IoU (each side used at most once).  The report carries:

* precision at IoU thresholds 0.50 .. 0.95 (step 0.05), pooled over images;
* their average -- reported as this tool's mAP analogue (the agent emits no
  confidence scores, so there is no score sweep to average over);
* mean matched IoU per instance-size bucket (unmatched instances count 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .coco_ingest import AnnotationSet, instance_mask, size_bucket
from .geometry import Polygon, rasterize_polygon_fill
from .reward import greedy_match

IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
BUCKETS = ("small", "medium", "large")


class ImageMismatch(Exception):
    """Predictions reference an image id absent from the annotations."""


@dataclass
class EvalReport:
    num_truth: int
    num_predictions: int
    num_matched: int
    precision_at: Dict[float, float]
    mean_precision: float
    bucket_mean_iou: Dict[str, float]
    bucket_counts: Dict[str, int]
    per_instance_iou: List[float] = field(default_factory=list)
    undefined_precision: bool = False

    def to_dict(self) -> dict:
        return {
            "num_truth": self.num_truth,
            "num_predictions": self.num_predictions,
            "num_matched": self.num_matched,
            "precision_at": {f"{t:.2f}": v for t, v in self.precision_at.items()},
            "mean_precision": self.mean_precision,
            "mean_precision_note": (
                "average of precision over the IoU thresholds; the agent emits "
                "no confidence scores, so there is no score sweep"
            ),
            "bucket_mean_iou": self.bucket_mean_iou,
            "bucket_counts": self.bucket_counts,
            "undefined_precision": self.undefined_precision,
        }

    def to_text(self) -> str:
        lines = [
            f"instances: {self.num_truth}   predictions: {self.num_predictions}"
            f"   matched: {self.num_matched}",
            "precision by IoU threshold:",
        ]
        for t in IOU_THRESHOLDS:
            lines.append(f"  @{t:.2f}  {self.precision_at[t]:.4f}")
        suffix = "  (no predictions)" if self.undefined_precision else ""
        lines.append(f"threshold-averaged precision: {self.mean_precision:.4f}{suffix}")
        lines.append("mean IoU by instance size:")
        for b in BUCKETS:
            lines.append(
                f"  {b:<7} {self.bucket_mean_iou[b]:.4f}  (n={self.bucket_counts[b]})"
            )
        return "\n".join(lines)


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 0.0
    return int(np.logical_and(a, b).sum()) / union


def evaluate(predictions: Dict[int, Sequence[Polygon]], truth: AnnotationSet) -> EvalReport:
    """Score per-image polygon predictions against ``truth``.

    ``predictions`` maps image id to polygons in original image coordinates.
    Unknown image ids raise ImageMismatch.  Scoring ground truth against
    itself yields 1.0 everywhere.
    """
    for image_id in predictions:
        if image_id not in truth.images:
            raise ImageMismatch(f"predictions reference unknown image id {image_id}")

    matched_ious: List[float] = []
    per_instance: List[float] = []
    bucket_ious: Dict[str, List[float]] = {b: [] for b in BUCKETS}
    n_predictions = 0

    for image_id in sorted(truth.images):
        info = truth.images[image_id]
        instances = [inst for inst in truth.instances if inst.image_id == image_id]
        preds = list(predictions.get(image_id, []))
        n_predictions += len(preds)
        if not instances and not preds:
            continue
        truth_masks = [instance_mask(inst, info.width, info.height) for inst in instances]
        pred_masks = [rasterize_polygon_fill(p, info.width, info.height) for p in preds]
        iou = np.zeros((len(preds), len(instances)), dtype=np.float64)
        for i, pm in enumerate(pred_masks):
            for j, tm in enumerate(truth_masks):
                iou[i, j] = _mask_iou(pm, tm)
        pairs = greedy_match(iou) if iou.size else []
        by_truth = {j: v for _, j, v in pairs}
        matched_ious.extend(v for _, _, v in pairs)
        for j, inst in enumerate(instances):
            v = by_truth.get(j, 0.0)
            per_instance.append(v)
            bucket_ious[size_bucket(inst, info)].append(v)

    precision_at: Dict[float, float] = {}
    undefined = n_predictions == 0
    for t in IOU_THRESHOLDS:
        tp = sum(1 for v in matched_ious if v >= t)
        precision_at[t] = 0.0 if undefined else tp / n_predictions
    mean_precision = float(np.mean([precision_at[t] for t in IOU_THRESHOLDS]))

    return EvalReport(
        num_truth=len(per_instance),
        num_predictions=n_predictions,
        num_matched=len(matched_ious),
        precision_at=precision_at,
        mean_precision=mean_precision,
        bucket_mean_iou={
            b: (float(np.mean(v)) if v else 0.0) for b, v in bucket_ious.items()
        },
        bucket_counts={b: len(v) for b, v in bucket_ious.items()},
        per_instance_iou=per_instance,
        undefined_precision=undefined,
    )
