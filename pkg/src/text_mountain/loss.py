"""Training objectives: TS cross-entropy with hard negative mining, TCBP and TCD L1 terms.

Everything here evaluates loss values on numpy rasters; there is no autograd.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from text_mountain.config import LossWeights
from text_mountain.errors import MapFormatError
from text_mountain.labelgen import LabelSet
from text_mountain.maps import MapBundle, RasterMap

logger = logging.getLogger(__name__)


class TsLoss(NamedTuple):
    """Value of the TS term and the sample counts behind it."""

    value: float
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class LossReport:
    """Per-term values and the weighted total ``l_ts + l1 * l_tcbp + l2 * l_tcd``."""

    l_ts: float
    l_tcbp: float
    l_tcd: float
    total: float
    n_pos: int = 0
    n_neg_selected: int = 0


def encode_tcd(u: ArrayLike) -> NDArray[np.float64]:
    """Map true ``[-1, 1]`` TCD components to sigmoid space ``[0, 1]``."""
    return (np.asarray(u, dtype=np.float64) + 1.0) / 2.0


def decode_tcd(p: ArrayLike) -> NDArray[np.float64]:
    """Map sigmoid outputs back to ``[-1, 1]`` (multiply by 2, subtract 1)."""
    return np.asarray(p, dtype=np.float64) * 2.0 - 1.0


def _check_size(pred: RasterMap, gt: LabelSet) -> None:
    if pred.size != gt.size:
        raise MapFormatError(f"Prediction size {pred.size} differs from label size {gt.size}.")


def pixel_bce(pred: ArrayLike, target: ArrayLike, eps: float = 1e-7) -> NDArray[np.float64]:
    """Per-pixel binary cross-entropy with probabilities clamped to ``[eps, 1 - eps]``."""
    p = np.clip(np.asarray(pred, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(target, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def hard_negative_indices(losses: ArrayLike, k: int) -> NDArray[np.intp]:
    """Indices of the ``k`` largest losses, ties broken by smaller index.

    Args:
        losses: Flat per-negative losses.
        k: Number of negatives to keep; clipped to the available count.
    """
    values = np.asarray(losses, dtype=np.float64)
    k = min(max(k, 0), values.size)
    order = np.argsort(-values, kind="stable")
    return order[:k]


def loss_ts(pred: RasterMap, gt: LabelSet, weights: LossWeights | None = None) -> TsLoss:
    """Mean cross-entropy over all positives and the hardest ``3 * n_pos`` negatives.

    Ignore-mask pixels are removed before selection. Without positives the
    ``fallback_negatives`` hardest negatives are used.
    """
    weights = weights or LossWeights()
    _check_size(pred, gt)
    target = gt.ts.plane(0).ravel() > 0.5
    care = ~gt.ignore.ravel()
    losses = pixel_bce(pred.plane(0).ravel(), target, weights.eps)

    pos = losses[target & care]
    neg = losses[~target & care]
    n_pos = int(pos.size)
    if n_pos:
        k = weights.neg_ratio * n_pos
    else:
        k = weights.fallback_negatives
        logger.debug("No positive pixels; using %d hardest negatives", k)
    selected = neg[hard_negative_indices(neg, k)]
    count = n_pos + selected.size
    value = float((pos.sum() + selected.sum()) / count) if count else 0.0
    return TsLoss(value, n_pos, int(selected.size))


def loss_tcbp(pred: RasterMap, gt: LabelSet) -> float:
    """L1 error on text pixels: ``sum TS* |pred - gt| / sum TS*`` (ignore pixels excluded)."""
    _check_size(pred, gt)
    weight = gt.ts.plane(0).astype(np.float64) * ~gt.ignore
    denom = weight.sum()
    if denom == 0:
        return 0.0
    diff = np.abs(pred.plane(0).astype(np.float64) - gt.tcbp.plane(0))
    return float((weight * diff).sum() / denom)


def _masked_l1(pred_u: RasterMap, gt_u: RasterMap, mask: NDArray[np.bool_]) -> float:
    count = int(mask.sum())
    if count == 0:
        return 0.0
    diff = np.abs(pred_u.data[:2].astype(np.float64) - gt_u.data[:2]).sum(axis=0)
    return float(diff[mask].sum() / count)


def loss_tcd(
    pred_u: RasterMap,
    gt_u: RasterMap,
    gt: LabelSet,
    pred_tcbp: RasterMap,
    gamma: float = 0.6,
) -> float:
    """L1 direction error on the predicted border ``TS* * (pred_TCBP < gamma)``.

    Args:
        pred_u: Predicted TCD, already decoded to ``[-1, 1]``.
        gt_u: Ground-truth TCD.
        gt: Labels supplying TS* and the ignore mask.
        pred_tcbp: Predicted TCBP that selects the border region.
        gamma: Center threshold.
    """
    _check_size(pred_u, gt)
    _check_size(pred_tcbp, gt)
    mask = (gt.ts.plane(0) > 0.5) & (pred_tcbp.plane(0) < gamma) & ~gt.ignore
    return _masked_l1(pred_u, gt_u, mask)


def loss_tcd_gt_masked(pred_u: RasterMap, gt: LabelSet, gamma: float = 0.6) -> float:
    """:func:`loss_tcd` with the border taken from ground-truth TCBP, independent of the model."""
    _check_size(pred_u, gt)
    mask = (gt.ts.plane(0) > 0.5) & (gt.tcbp.plane(0) < gamma) & ~gt.ignore
    return _masked_l1(pred_u, gt.tcd, mask)


def loss_center_binary(pred: RasterMap, gt: LabelSet, gamma: float = 0.6, eps: float = 1e-7) -> float:
    """Cross-entropy on text pixels against the hard center map ``TCBP* > gamma``."""
    _check_size(pred, gt)
    text = (gt.ts.plane(0) > 0.5) & ~gt.ignore
    if not text.any():
        return 0.0
    target = gt.tcbp.plane(0) > gamma
    return float(pixel_bce(pred.plane(0)[text], target[text], eps).mean())


def total_loss(
    l_ts: float,
    l_tcbp: float,
    l_tcd: float,
    weights: LossWeights | None = None,
    n_pos: int = 0,
    n_neg_selected: int = 0,
) -> LossReport:
    """Weighted sum of the three terms."""
    weights = weights or LossWeights()
    total = l_ts + weights.lambda_tcbp * l_tcbp + weights.lambda_tcd * l_tcd
    return LossReport(l_ts, l_tcbp, l_tcd, total, n_pos, n_neg_selected)


def compute_losses(
    pred: MapBundle,
    gt: LabelSet,
    weights: LossWeights | None = None,
    gamma: float = 0.6,
    gt_border_mask: bool = False,
) -> LossReport:
    """All three terms between a prediction bundle and its labels.

    Args:
        pred: Predicted maps; ``pred.tcd`` must already be decoded to ``[-1, 1]``.
        gt: Ground-truth labels.
        weights: Balancing factors; defaults to ``LossWeights()``.
        gamma: Center threshold of the TCD border mask.
        gt_border_mask: Mask the TCD term with ground-truth instead of predicted TCBP.

    Returns:
        LossReport: Term values, weighted total and OHEM sample counts.
    """
    weights = weights or LossWeights()
    ts_term = loss_ts(pred.ts, gt, weights)
    l_tcbp = loss_tcbp(pred.tcbp, gt)
    if pred.tcd is None:
        l_tcd = 0.0
    elif gt_border_mask:
        l_tcd = loss_tcd_gt_masked(pred.tcd, gt, gamma)
    else:
        l_tcd = loss_tcd(pred.tcd, gt.tcd, gt, pred.tcbp, gamma)
    return total_loss(ts_term.value, l_tcbp, l_tcd, weights, ts_term.n_pos, ts_term.n_neg)
