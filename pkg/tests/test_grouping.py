"""Tests for peak extraction, next-step graphs and the mountain climb."""

import numpy as np
import pytest

from text_mountain.config import GroupConfig
from text_mountain.grouping import (
    NextMap,
    climb_parallel,
    extract_peaks,
    filter_peaks,
    group_baseline,
    group_parallel,
    group_sequential,
    instance_scores,
    next_from_tcbp,
    next_from_tcd,
    score_instances,
    text_mask,
)
from text_mountain.maps import InstanceMap

ROW = np.array([[0.2, 0.5, 0.9, 0.5, 0.2]])


def test_single_peak_in_row():
    """Only the pixel above gamma is a peak; the rest is border."""
    peaks = extract_peaks(ROW, np.ones_like(ROW))
    assert peaks.count == 1
    assert peaks.seeds.labels.tolist() == [[0, 0, 1, 0, 0]]
    assert peaks.border.tolist() == [[True, True, False, True, True]]


def test_two_plateaus_give_two_peaks():
    """Plateaus split by a valley are two peaks."""
    tcbp = np.array([[0.9, 0.9, 0.3, 0.9, 0.9]])
    assert extract_peaks(tcbp, np.ones_like(tcbp)).count == 2


def test_no_peaks_leaves_everything_border():
    """Without a value above gamma every text pixel is border."""
    tcbp = np.full((4, 4), 0.5)
    peaks = extract_peaks(tcbp, np.ones_like(tcbp))
    assert peaks.count == 0
    assert peaks.border.all()


def test_diagonal_peaks_stay_separate():
    """Peaks touching only at a corner are not joined."""
    tcbp = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert extract_peaks(tcbp, np.ones_like(tcbp)).count == 2


@pytest.mark.parametrize(
    ("score", "kept"),
    [(0.95, True), (0.65, False), (0.7, True)],
)
def test_instance_score_threshold(score, kept):
    """A peak survives when its mean TS reaches 0.7, float32 rounding included."""
    seeds = InstanceMap(np.array([[1, 1, 0]]))
    ts = np.array([[score, score, 1.0]], dtype=np.float32)
    result = score_instances(seeds, ts, GroupConfig())
    assert (result.count == 1) is kept


def test_score_instances_relabels_densely():
    """Surviving peaks are renumbered 1..K in order."""
    seeds = InstanceMap(np.array([[1, 0, 2, 0, 3]]))
    ts = np.array([[0.9, 0.0, 0.2, 0.0, 0.8]])
    result = score_instances(seeds, ts)
    assert result.labels.tolist() == [[1, 0, 0, 0, 2]]
    np.testing.assert_allclose(instance_scores(seeds, ts)[1:], [0.9, 0.2, 0.8])


def test_filter_peaks_drops_small_peaks():
    """Peaks under ``min_peak_area`` pixels are removed and the rest renumbered."""
    tcbp = np.zeros((6, 12))
    tcbp[0, 0] = 0.95
    tcbp[2:5, 2:7] = 0.95
    tcbp[0, 10:12] = 0.95
    seeds = extract_peaks(tcbp, np.ones_like(tcbp)).seeds
    assert seeds.count == 3
    result = filter_peaks(seeds, tcbp)
    assert result.count == 1
    assert (result.labels == 1).sum() == 15
    assert filter_peaks(seeds, tcbp, GroupConfig(min_peak_area=2)).count == 2


def test_filter_peaks_drops_shallow_peaks():
    """A wide peak that never reaches ``peak_core_min`` is removed."""
    tcbp = np.zeros((6, 12))
    tcbp[1:5, 1:5] = 0.7
    tcbp[1:5, 7:11] = 0.7
    tcbp[2, 8] = 0.85
    seeds = extract_peaks(tcbp, np.ones_like(tcbp)).seeds
    result = filter_peaks(seeds, tcbp)
    assert result.count == 1
    assert result.labels[2, 8] == 1
    assert result.labels[2, 2] == 0
    assert filter_peaks(seeds, tcbp, GroupConfig(peak_core_min=0.6)).count == 2


def test_filter_peaks_without_peaks():
    """An empty seed map passes through unchanged."""
    seeds = InstanceMap.empty(4, 3)
    assert filter_peaks(seeds, np.zeros((3, 4))).count == 0


def test_next_from_tcbp_unique_maximum():
    """The step points at the single highest neighbour."""
    tcbp = np.full((3, 3), 0.1)
    tcbp[0, 2] = 0.8
    next_map = next_from_tcbp(tcbp, np.ones((3, 3), dtype=bool))
    assert next_map.offset(1, 1) == (1, -1)


def test_next_from_tcbp_ties_take_first_neighbour():
    """Equal neighbours resolve to the first in row-major order."""
    next_map = next_from_tcbp(np.full((3, 3), 0.5), np.ones((3, 3), dtype=bool))
    assert next_map.offset(1, 1) == (-1, -1)


def test_next_from_tcbp_local_maximum_points_to_largest_neighbour():
    """A local maximum still steps to its largest neighbour, forming a 2-cycle."""
    tcbp = np.array([[0.1, 0.2, 0.1], [0.3, 0.9, 0.4], [0.1, 0.2, 0.1]])
    next_map = next_from_tcbp(tcbp, np.ones((3, 3), dtype=bool))
    assert next_map.offset(1, 1) == (1, 0)
    assert next_map.offset(1, 2) == (-1, 0)


def test_next_from_tcbp_stays_inside_image():
    """Neighbours outside the image are never chosen."""
    tcbp = np.array([[0.3, 0.1]])
    next_map = next_from_tcbp(tcbp, np.ones((1, 2), dtype=bool))
    assert next_map.offset(0, 1) == (-1, 0)
    assert next_map.offset(0, 0) == (1, 0)


@pytest.mark.parametrize(
    ("u", "step"),
    [((0.9, 0.1), (1, 0)), ((0.707, 0.707), (1, 1)), ((0.3, -0.2), (0, 0))],
)
def test_next_from_tcd_quantization(u, step):
    """Each component is quantized against cos(3 pi / 8)."""
    field = np.zeros((2, 3, 3))
    field[:, 1, 1] = u
    assert next_from_tcd(field).offset(1, 1) == step


def test_next_from_tcd_matches_angle_table():
    """Sector boundaries sit at cos(3 pi / 8), i.e. 22.5 degrees either side of each step."""
    degrees = np.arange(360)
    field = np.zeros((2, 3, 362))
    field[0, 1, 1:361] = np.cos(np.deg2rad(degrees))
    field[1, 1, 1:361] = np.sin(np.deg2rad(degrees))
    next_map = next_from_tcd(field)
    a = degrees.astype(float)
    expected_dx = np.where((a < 67.5) | (a > 292.5), 1, np.where((a > 112.5) & (a < 247.5), -1, 0))
    expected_dy = np.where((a > 22.5) & (a < 157.5), 1, np.where((a > 202.5) & (a < 337.5), -1, 0))
    np.testing.assert_array_equal(next_map.dx[1, 1:361], expected_dx)
    np.testing.assert_array_equal(next_map.dy[1, 1:361], expected_dy)


def test_next_from_tcd_clamps_at_edges():
    """Steps that would leave the image are cut to zero on that axis."""
    field = np.zeros((2, 2, 2))
    field[0] = -1.0
    field[1] = -1.0
    next_map = next_from_tcd(field)
    assert next_map.offset(0, 0) == (0, 0)
    assert next_map.offset(1, 1) == (-1, -1)


def test_next_map_rejects_out_of_bounds_steps():
    """A next map may not point outside the image."""
    with pytest.raises(ValueError):
        NextMap(np.array([[1]]), np.array([[0]]))


def test_row_climbs_to_single_peak():
    """Every pixel of a single mountain joins its peak in both climbs."""
    cfg = GroupConfig()
    ts = np.ones_like(ROW)
    seeds = score_instances(extract_peaks(ROW, ts, cfg).seeds, ts, cfg)
    text = text_mask(ts, cfg)
    next_map = next_from_tcbp(ROW, text)
    assert group_parallel(seeds, next_map, text).labels.tolist() == [[1, 1, 1, 1, 1]]
    assert group_sequential(seeds, next_map, text).labels.tolist() == [[1, 1, 1, 1, 1]]


def test_two_pixel_cycle_is_blocked():
    """A cycle without a peak leaves both pixels blocked and uncolored."""
    next_map = NextMap(np.array([[1, -1]]), np.array([[0, 0]]))
    text = np.ones((1, 2), dtype=bool)
    trace = climb_parallel(InstanceMap.empty(2, 1), next_map, text)
    assert trace.labels.labels.tolist() == [[0, 0]]
    assert trace.blocked.all()
    assert group_sequential(InstanceMap.empty(2, 1), next_map, text).labels.tolist() == [[0, 0]]


def test_walk_leaving_text_is_blocked():
    """A walk into background stays uncolored."""
    next_map = NextMap(np.array([[1, 1, 0]]), np.array([[0, 0, 0]]))
    text = np.array([[True, True, False]])
    seeds = InstanceMap.empty(3, 1)
    assert group_parallel(seeds, next_map, text).labels.tolist() == [[0, 0, 0]]


def test_background_only_map():
    """A full-size map without text gives no instances."""
    seeds = InstanceMap.empty(1280, 768)
    text = np.zeros((768, 1280), dtype=bool)
    next_map = NextMap(np.zeros((768, 1280), np.int8), np.zeros((768, 1280), np.int8))
    assert group_parallel(seeds, next_map, text, workers=2).count == 0


def test_radial_direction_field_reaches_single_peak():
    """Inward directions on a disk bring every text pixel to the central peak."""
    size, center = 25, 12.5
    rows, cols = np.indices((size, size))
    dx, dy = center - (cols + 0.5), center - (rows + 0.5)
    radius = np.hypot(dx, dy)
    text = radius <= 10
    tcbp = np.where(text, 1 - radius / 10, 0.0)
    u = np.stack([dx, dy]) / np.maximum(radius, 1e-9)
    cfg = GroupConfig()
    peaks = extract_peaks(tcbp, text.astype(float), cfg)
    assert peaks.count == 1
    labels = group_parallel(peaks.seeds, next_from_tcd(u), text)
    assert (labels.labels[text] == 1).all()
    assert (labels.labels[~text] == 0).all()


def _random_instance(rng: np.random.Generator) -> tuple[InstanceMap, NextMap, np.ndarray]:
    height, width = rng.integers(1, 16, size=2)
    text = rng.random((height, width)) < 0.8
    if rng.random() < 0.5:
        # Quantized values make plateaus and tie cycles common.
        tcbp = np.round(rng.random((height, width)) * 4) / 4
        seeds = extract_peaks(tcbp, text.astype(float)).seeds
        next_map = next_from_tcbp(tcbp, text)
    else:
        seeds = InstanceMap(np.where(rng.random((height, width)) < 0.1, rng.integers(1, 4, (height, width)), 0) * text)
        dx = rng.integers(-1, 2, (height, width))
        dy = rng.integers(-1, 2, (height, width))
        dx[:, 0] = np.maximum(dx[:, 0], 0)
        dx[:, -1] = np.minimum(dx[:, -1], 0)
        dy[0, :] = np.maximum(dy[0, :], 0)
        dy[-1, :] = np.minimum(dy[-1, :], 0)
        next_map = NextMap(dx, dy)
    return seeds, next_map, text


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_parallel_matches_sequential(rng, workers):
    """On 200 random graphs the parallel climb equals the sequential one."""
    for _ in range(200):
        seeds, next_map, text = _random_instance(rng)
        expected = group_sequential(seeds, next_map, text)
        result = group_parallel(seeds, next_map, text, workers)
        np.testing.assert_array_equal(result.labels, expected.labels)


def test_block_map_only_marks_uncolored_routes(rng):
    """No colored text pixel is ever marked blocked."""
    for _ in range(50):
        seeds, next_map, text = _random_instance(rng)
        trace = climb_parallel(seeds, next_map, text)
        colored = trace.labels.labels != 0
        assert not (trace.blocked & colored & text).any()


def test_baseline_labels_connected_text():
    """The baseline merges text regions as soon as they touch."""
    ts = np.zeros((5, 9))
    ts[1:4, 1:4] = 0.9
    ts[1:4, 5:8] = 0.9
    assert group_baseline(ts).count == 2
    ts[2, 4] = 0.9
    assert group_baseline(ts).count == 1
