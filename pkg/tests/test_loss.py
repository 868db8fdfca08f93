"""Tests for the TS, TCBP and TCD training objectives."""

import math

import numpy as np
import pytest

from text_mountain.config import LossWeights
from text_mountain.errors import MapFormatError
from text_mountain.geometry import TextPolygon
from text_mountain.labelgen import LabelSet, generate_labels
from text_mountain.loss import (
    compute_losses,
    decode_tcd,
    encode_tcd,
    hard_negative_indices,
    loss_center_binary,
    loss_tcbp,
    loss_tcd,
    loss_tcd_gt_masked,
    loss_ts,
    pixel_bce,
    total_loss,
)
from text_mountain.maps import InstanceMap, MapBundle, RasterMap


def make_labels(ts, tcbp=None, tcd=None, ignore=None) -> LabelSet:
    ts = np.asarray(ts, dtype=np.float32)
    height, width = ts.shape
    tcbp = np.zeros_like(ts) if tcbp is None else np.asarray(tcbp, dtype=np.float32)
    tcd = np.zeros((2, height, width), dtype=np.float32) if tcd is None else tcd
    ignore = np.zeros(ts.shape, dtype=bool) if ignore is None else ignore
    return LabelSet(
        RasterMap(ts), RasterMap(tcbp), RasterMap(tcd), ignore, InstanceMap.empty(width, height)
    )


@pytest.fixture
def rect_labels() -> LabelSet:
    poly = TextPolygon.from_coords([10, 10, 90, 10, 90, 31, 10, 31])
    return generate_labels([poly], (200, 100))


def test_ts_loss_is_zero_at_ground_truth(rect_labels):
    """The TS loss vanishes when the prediction equals the ground truth."""
    result = loss_ts(rect_labels.ts, rect_labels)
    assert result.value < 1e-5


def test_ts_loss_keeps_three_negatives_per_positive(rng):
    """Hard negative mining keeps three negatives for each positive pixel."""
    gt = np.zeros((10, 10))
    gt.flat[:10] = 1.0
    pred = RasterMap(rng.uniform(0.01, 0.99, (10, 10)))
    result = loss_ts(pred, make_labels(gt))
    assert result.n_pos == 10
    assert result.n_neg == 30


def test_ts_loss_without_positives_uses_fallback_negatives():
    """An image without text still trains on a fixed number of negatives."""
    labels = make_labels(np.zeros((20, 20)))
    result = loss_ts(RasterMap(np.full((20, 20), 0.5)), labels)
    assert result.n_pos == 0
    assert result.n_neg == 256
    assert result.value == pytest.approx(math.log(2))


def test_ts_loss_selects_hardest_negatives():
    """The negatives with the largest loss are the ones kept."""
    gt = np.zeros((4, 4))
    gt[0, 0] = 1.0
    pred = np.full((4, 4), 0.1)
    pred[0, 0] = 0.9
    pred[3, 3] = 0.8
    pred[2, 2] = 0.7
    pred[1, 1] = 0.6
    result = loss_ts(RasterMap(pred), make_labels(gt))
    expected = (pixel_bce(0.9, 1) + pixel_bce(0.8, 0) + pixel_bce(0.7, 0) + pixel_bce(0.6, 0)) / 4
    assert result.value == pytest.approx(float(expected))


def test_ts_loss_ignores_dont_care_pixels():
    """Pixels under the ignore mask contribute nothing."""
    gt = np.zeros((4, 4))
    gt[0, 0] = 1.0
    ignore = np.zeros((4, 4), dtype=bool)
    ignore[3, 3] = True
    pred = np.full((4, 4), 0.1)
    pred[0, 0] = 0.9
    pred[3, 3] = 0.99
    with_ignore = loss_ts(RasterMap(pred), make_labels(gt, ignore=ignore))
    pred[3, 3] = 0.1
    without_hard = loss_ts(RasterMap(pred), make_labels(gt, ignore=ignore))
    assert with_ignore.value == pytest.approx(without_hard.value)


def test_hard_negative_selection_property(rng):
    """The selected negatives are the top losses, ties broken by lower index."""
    for _ in range(50):
        losses = rng.integers(0, 5, size=40).astype(float)
        k = int(rng.integers(0, 45))
        chosen = hard_negative_indices(losses, k)
        assert chosen.size == min(k, 40)
        rest = np.setdiff1d(np.arange(40), chosen)
        if chosen.size and rest.size:
            assert losses[chosen].min() >= losses[rest].max()
            ties = losses[rest] == losses[chosen].min()
            assert (rest[ties] > chosen[losses[chosen] == losses[chosen].min()].max()).all()


def test_pixel_bce_clamps_probabilities():
    """Probabilities of exactly 0 and 1 give finite losses."""
    assert np.isfinite(pixel_bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))).all()


def test_tcbp_loss_zero_at_ground_truth(rect_labels):
    """The TCBP loss vanishes at the ground truth."""
    assert loss_tcbp(rect_labels.tcbp, rect_labels) == 0.0


def test_tcbp_loss_constant_offset():
    """A constant offset inside text gives that offset as the loss."""
    ts = np.zeros((5, 5))
    ts[1:4, 1:4] = 1.0
    tcbp = 0.5 * ts
    labels = make_labels(ts, tcbp)
    pred = RasterMap(np.clip(tcbp + 0.1, 0, 1))
    assert loss_tcbp(pred, labels) == pytest.approx(0.1, rel=1e-6)


def test_tcbp_loss_without_text_is_zero(rng):
    """Without text pixels the TCBP loss is zero."""
    labels = make_labels(np.zeros((6, 6)))
    assert loss_tcbp(RasterMap(rng.random((6, 6))), labels) == 0.0


def test_tcd_loss_zero_when_directions_match(rect_labels):
    """Matching directions give zero TCD loss."""
    assert loss_tcd(rect_labels.tcd, rect_labels.tcd, rect_labels, rect_labels.tcbp) == 0.0


def test_tcd_loss_zero_without_predicted_border(rect_labels, rng):
    """TCD is only scored where the predicted TCBP is below gamma."""
    pred_u = RasterMap(rng.uniform(-1, 1, (2, 100, 200)))
    pred_tcbp = RasterMap(np.full((100, 200), 0.6))
    assert loss_tcd(pred_u, rect_labels.tcd, rect_labels, pred_tcbp, gamma=0.6) == 0.0


def test_tcd_loss_single_pixel_l1():
    """One border pixel gives the L1 distance of its two vectors."""
    ts = np.zeros((3, 3))
    ts[1, 1] = 1.0
    gt_u = np.zeros((2, 3, 3))
    gt_u[1, 1, 1] = 1.0
    pred_u = np.zeros((2, 3, 3))
    pred_u[0, 1, 1] = 1.0
    labels = make_labels(ts, tcd=gt_u)
    value = loss_tcd(RasterMap(pred_u), RasterMap(gt_u), labels, RasterMap(np.zeros((3, 3))))
    assert value == pytest.approx(2.0)
    assert loss_tcd_gt_masked(RasterMap(pred_u), labels) == pytest.approx(2.0)


@pytest.mark.parametrize(
    ("terms", "expected"),
    [((0.0, 0.0, 0.0), 0.0), ((1.0, 1.0, 1.0), 8.5), ((0.2, 0.1, 0.0), 0.7)],
)
def test_total_loss_weights(terms, expected):
    """The total combines the terms with the default weights."""
    assert total_loss(*terms).total == pytest.approx(expected)


def test_total_loss_custom_weights():
    """Custom weights replace the defaults."""
    report = total_loss(1.0, 1.0, 1.0, LossWeights(lambda_tcbp=1.0, lambda_tcd=1.0))
    assert report.total == pytest.approx(3.0)


def test_compute_losses_at_ground_truth(rect_labels):
    """All losses vanish when the prediction is the ground truth."""
    report = compute_losses(rect_labels.as_bundle(), rect_labels)
    assert report.total < 1e-5
    assert report.n_neg_selected == 3 * report.n_pos
    assert report.total == report.l_ts + 5.0 * report.l_tcbp + 2.5 * report.l_tcd


def test_compute_losses_without_tcd(rect_labels):
    """A prediction without TCD has zero TCD loss."""
    pred = MapBundle(rect_labels.ts, rect_labels.tcbp)
    assert compute_losses(pred, rect_labels).l_tcd == 0.0


def test_compute_losses_gt_border_mask(rect_labels, rng):
    """Ground-truth border masking scores TCD noise on the border only."""
    noisy = RasterMap(rect_labels.tcd.data + rng.normal(0, 0.1, rect_labels.tcd.data.shape))
    pred = MapBundle(rect_labels.ts, RasterMap(np.ones((100, 200))), noisy)
    assert compute_losses(pred, rect_labels).l_tcd == 0.0
    assert compute_losses(pred, rect_labels, gt_border_mask=True).l_tcd > 0.0


def test_sigmoid_codec():
    """TCD components map from [-1, 1] to [0, 1] and back."""
    u = np.array([-1.0, 0.0, 0.5, 1.0])
    np.testing.assert_allclose(encode_tcd(u), [0.0, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(decode_tcd(encode_tcd(u)), u)


def test_binary_center_loss_is_small_at_target(rect_labels):
    """The binary center loss is small at its own target."""
    target = RasterMap((rect_labels.tcbp.plane(0) > 0.6).astype(np.float32))
    assert loss_center_binary(target, rect_labels) < 1e-5


def test_size_mismatch_raises(rect_labels):
    """Maps of a different size are rejected."""
    with pytest.raises(MapFormatError):
        loss_ts(RasterMap(np.zeros((10, 10))), rect_labels)
