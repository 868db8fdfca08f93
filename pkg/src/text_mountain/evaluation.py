"""Polygon-IoU detection evaluation with VOC-style greedy matching."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from shapely.geometry import Polygon
from shapely.geometry.base import BaseGeometry

from text_mountain.detect import Detection
from text_mountain.geometry import TextPolygon

logger = logging.getLogger(__name__)

PER_IMAGE_COLUMNS = [
    "image",
    "tp",
    "fp",
    "fn",
    "ignored",
    "precision",
    "recall",
    "f_measure",
    "min_iou",
]


def _as_geometry(polygon: ArrayLike | TextPolygon | Detection | BaseGeometry) -> BaseGeometry:
    if isinstance(polygon, BaseGeometry):
        geom = polygon
    else:
        if isinstance(polygon, TextPolygon | Detection):
            coords = polygon.vertices if isinstance(polygon, TextPolygon) else polygon.polygon
        else:
            coords = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
        if len(coords) < 3:
            return Polygon()
        geom = Polygon(coords)
    if not geom.is_valid:
        geom = geom.buffer(0)
    return geom


def polygon_iou(
    a: ArrayLike | TextPolygon | Detection | BaseGeometry,
    b: ArrayLike | TextPolygon | Detection | BaseGeometry,
) -> float:
    """Intersection over union of two polygons; 0 when either has zero area."""
    poly_a = _as_geometry(a)
    poly_b = _as_geometry(b)
    if poly_a.is_empty or poly_b.is_empty or poly_a.area <= 0 or poly_b.area <= 0:
        return 0.0
    if not poly_a.intersects(poly_b):
        return 0.0
    inter = poly_a.intersection(poly_b).area
    union = poly_a.area + poly_b.area - inter
    return float(min(max(inter / union, 0.0), 1.0)) if union > 0 else 0.0


def f_measure(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass(frozen=True, eq=False)
class EvalResult:
    """Aggregate precision, recall and F-measure with counts.

    Attributes:
        ious: IoU of every true-positive match.
        per_image: One row per image with the columns of ``PER_IMAGE_COLUMNS``.
    """

    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    ignored: int = 0
    ious: tuple[float, ...] = ()
    per_image: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=PER_IMAGE_COLUMNS))

    @classmethod
    def from_counts(
        cls,
        tp: int,
        fp: int,
        fn: int,
        ignored: int = 0,
        ious: Sequence[float] = (),
        per_image: pd.DataFrame | None = None,
    ) -> "EvalResult":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        return cls(
            precision=precision,
            recall=recall,
            f_measure=f_measure(precision, recall),
            tp=tp,
            fp=fp,
            fn=fn,
            ignored=ignored,
            ious=tuple(ious),
            per_image=per_image
            if per_image is not None
            else pd.DataFrame(columns=PER_IMAGE_COLUMNS),
        )

    def summary(self) -> str:
        return (
            f"P={self.precision:.3f} R={self.recall:.3f} F={self.f_measure:.3f} "
            f"(tp={self.tp} fp={self.fp} fn={self.fn} ignored={self.ignored})"
        )


def match_and_score(
    dets: Sequence[Detection],
    gts: Sequence[TextPolygon],
    iou_min: float = 0.5,
    ignore_dont_care: bool = True,
    image: str = "",
) -> EvalResult:
    """Greedy matching of one image's detections against its ground truth.

    Detections are visited by descending score (ties keep input order). A detection
    overlapping a DO-NOT-CARE region with IoU >= ``iou_min`` is discarded before
    matching; otherwise it takes the unmatched GT with the highest IoU >= ``iou_min``
    or counts as a false positive.

    Args:
        dets: Scored detections.
        gts: Ground-truth polygons with ignore flags.
        iou_min: Match threshold.
        ignore_dont_care: When False, DO-NOT-CARE polygons are scored like the others.
        image: Name used in the per-image row.

    Returns:
        EvalResult: Counts for this image.
    """
    care = [g for g in gts if not (ignore_dont_care and g.ignore)]
    dont_care = [g for g in gts if ignore_dont_care and g.ignore]
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    matched = [False] * len(care)
    tp = fp = ignored = 0
    ious: list[float] = []
    for i in order:
        det = dets[i]
        if any(polygon_iou(det, g) >= iou_min for g in dont_care):
            ignored += 1
            continue
        best, best_iou = -1, iou_min
        for j, gt in enumerate(care):
            if matched[j]:
                continue
            iou = polygon_iou(det, gt)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            matched[best] = True
            tp += 1
            ious.append(best_iou)
        else:
            fp += 1
    fn = len(care) - tp
    result = EvalResult.from_counts(tp, fp, fn, ignored, ious)
    row = {
        "image": image,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "ignored": ignored,
        "precision": result.precision,
        "recall": result.recall,
        "f_measure": result.f_measure,
        "min_iou": min(ious) if ious else float("nan"),
    }
    return EvalResult.from_counts(tp, fp, fn, ignored, ious, pd.DataFrame([row], columns=PER_IMAGE_COLUMNS))


def evaluate_dataset(
    samples: Mapping[str, tuple[Sequence[Detection], Sequence[TextPolygon]]],
    iou_min: float = 0.5,
    ignore_dont_care: bool = True,
) -> EvalResult:
    """Evaluate every image independently and sum the counts.

    Args:
        samples: Image name to ``(detections, ground truth)``.
        iou_min: Match threshold.
        ignore_dont_care: Whether DO-NOT-CARE regions are excluded.

    Returns:
        EvalResult: Dataset totals with a per-image table.
    """
    results = [
        match_and_score(dets, gts, iou_min, ignore_dont_care, image=name)
        for name, (dets, gts) in samples.items()
    ]
    if not results:
        return EvalResult.from_counts(0, 0, 0)
    per_image = pd.concat([r.per_image for r in results], ignore_index=True)
    ious = [iou for r in results for iou in r.ious]
    result = EvalResult.from_counts(
        tp=sum(r.tp for r in results),
        fp=sum(r.fp for r in results),
        fn=sum(r.fn for r in results),
        ignored=sum(r.ignored for r in results),
        ious=ious,
        per_image=per_image,
    )
    logger.info("Evaluated %d image(s): %s", len(results), result.summary())
    return result
