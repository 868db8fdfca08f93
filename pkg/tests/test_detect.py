"""Tests for polygon fitting and the end-to-end detection pipeline."""

import math
import time

import numpy as np
import pytest

from text_mountain.config import DetectMode, GraphSource, GroupConfig
from text_mountain.detect import (
    detect_instances,
    detect_pipeline,
    instance_to_polygons,
    min_area_rect,
)
from text_mountain.errors import MapFormatError
from text_mountain.evaluation import evaluate_dataset, polygon_iou
from text_mountain.geometry import TextPolygon, points_in_polygon
from text_mountain.labelgen import generate_labels
from text_mountain.maps import InstanceMap, MapBundle, RasterMap
from text_mountain.services.synth import NOISE_STREAM, SyntheticSceneGenerator, add_noise

SCENE_COUNT = 50
SCENE_SEED = 2024


@pytest.fixture(scope="module")
def scene_generator() -> SyntheticSceneGenerator:
    """Default 640x640 scenes of rotated rectangles."""
    return SyntheticSceneGenerator(seed=SCENE_SEED)


@pytest.fixture(scope="module")
def scenes(scene_generator):
    """Fifty seeded scenes with exact label maps."""
    return [scene_generator.scene(index) for index in range(SCENE_COUNT)]


def polygon_mask(poly: TextPolygon, width: int, height: int) -> np.ndarray:
    rows, cols = np.indices((height, width))
    inside = points_in_polygon(poly, cols.ravel() + 0.5, rows.ravel() + 0.5)
    return inside.reshape(height, width)


def test_axis_aligned_instance_gives_its_rectangle():
    """A filled axis-aligned block is fitted by its own rectangle."""
    labels = np.zeros((50, 150), dtype=np.int32)
    labels[10:30, 20:120] = 1
    (det,) = instance_to_polygons(InstanceMap(labels), np.ones((50, 150)))
    expected = [[20, 10], [120, 10], [120, 30], [20, 30]]
    np.testing.assert_allclose(det.polygon, expected, atol=1.0)
    assert det.score == pytest.approx(1.0)


def test_rotated_rectangle_angle():
    """The fitted rectangle of a 45 degree text follows its orientation."""
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    corners = np.array([[-40, -10], [40, -10], [40, 10], [-40, 10]], dtype=float)
    rotated = np.stack([corners[:, 0] * c - corners[:, 1] * s, corners[:, 0] * s + corners[:, 1] * c], 1)
    poly = TextPolygon.from_coords(rotated + 60)
    mask = polygon_mask(poly, 120, 120)
    rows, cols = np.nonzero(mask)
    rect = min_area_rect(np.stack([cols + 0.5, rows + 0.5], axis=1))
    edge = rect[1] - rect[0]
    angle = math.degrees(math.atan2(edge[1], edge[0])) % 90
    assert abs(angle - 45) < 2


def test_min_area_rect_of_single_point():
    """One pixel grows to a unit square."""
    rect = min_area_rect([[3.5, 4.5]], pixel_count=1)
    assert abs(TextPolygon.from_coords(rect).area - 1.0) < 1e-6


def test_disk_curved_polygon_area():
    """A traced disk keeps its area within 5% using at most 14 vertices."""
    rows, cols = np.indices((80, 80))
    disk = np.hypot(cols + 0.5 - 40, rows + 0.5 - 40) <= 30
    (det,) = instance_to_polygons(InstanceMap(disk.astype(np.int32)), disk, DetectMode.CURVED)
    assert len(det.polygon) <= 14
    assert det.area == pytest.approx(math.pi * 30**2, rel=0.05)


def test_tiny_instances_are_dropped():
    """Instances under the minimum area give no detection."""
    labels = np.zeros((20, 20), dtype=np.int32)
    labels[2:4, 2:4] = 1
    labels[10:15, 5:15] = 2
    dets = instance_to_polygons(InstanceMap(labels), np.ones((20, 20)))
    assert len(dets) == 1


def test_single_rectangle_round_trip():
    """Exact maps of one rectangle detect that rectangle."""
    poly = TextPolygon.from_coords([20, 10, 120, 10, 120, 30, 20, 30])
    bundle = generate_labels([poly], (160, 50)).as_bundle()
    (det,) = detect_pipeline(bundle)
    assert polygon_iou(det, poly) >= 0.95


def test_touching_rectangles_stay_apart():
    """Touching texts stay separate, unlike plain TS components."""
    left = TextPolygon.from_coords([0, 5, 50, 5, 50, 25, 0, 25])
    right = TextPolygon.from_coords([50, 5, 100, 5, 100, 25, 50, 25])
    bundle = generate_labels([left, right], (100, 30)).as_bundle()
    dets = detect_pipeline(bundle)
    assert len(dets) == 2
    baseline = detect_pipeline(bundle, GroupConfig(graph_source=GraphSource.TS))
    assert len(baseline) == 1


def test_tcd_graph_matches_tcbp_graph_on_exact_maps():
    """Climbing along TCD finds the same single instance."""
    poly = TextPolygon.from_coords([20, 10, 120, 10, 120, 34, 20, 34])
    bundle = generate_labels([poly], (160, 50)).as_bundle()
    via_tcd = detect_instances(bundle, GroupConfig(graph_source=GraphSource.TCD))
    assert via_tcd.count == 1
    (det,) = instance_to_polygons(via_tcd, bundle.ts)
    assert polygon_iou(det, poly) >= 0.9


def test_small_and_shallow_peaks_do_not_seed_instances():
    """Islands above gamma in the foot of a text are not turned into extra instances."""
    poly = TextPolygon.from_coords([20, 10, 120, 10, 120, 50, 20, 50])
    labels = generate_labels([poly], (140, 60))
    tcbp = labels.tcbp.data.copy()
    tcbp[0, 14, 30] = 0.65
    tcbp[0, 13:16, 60:63] = 0.7
    tcbp[0, 12:16, 80:85] = 0.7
    bundle = MapBundle(labels.ts, RasterMap(tcbp), labels.tcd)

    unfiltered = GroupConfig(min_peak_area=1, peak_core_min=0.0)
    assert detect_instances(bundle, unfiltered).count == 4
    assert detect_instances(bundle).count == 1
    (det,) = detect_pipeline(bundle)
    assert polygon_iou(det, poly) >= 0.9


def test_empty_maps_give_no_detections():
    """Zero maps detect nothing."""
    bundle = MapBundle(RasterMap.zeros(64, 32), RasterMap.zeros(64, 32))
    assert detect_pipeline(bundle) == []


def test_tcd_graph_without_tcd_map():
    """The TCD graph needs a TCD map."""
    bundle = MapBundle(RasterMap.zeros(8, 8), RasterMap.zeros(8, 8))
    with pytest.raises(MapFormatError):
        detect_pipeline(bundle, GroupConfig(graph_source=GraphSource.TCD))


def test_synthetic_scenes_round_trip(scenes):
    """Exact maps of fifty 640x640 scenes detect every text with IoU >= 0.9 in under 30 s."""
    start = time.perf_counter()
    samples = {
        scene.name: (detect_pipeline(scene.labels.as_bundle()), scene.polygons) for scene in scenes
    }
    result = evaluate_dataset(samples)
    elapsed = time.perf_counter() - start
    assert result.f_measure == pytest.approx(1.0)
    assert min(result.ious) >= 0.90
    assert elapsed < 30.0


def test_noisy_scenes_round_trip(scenes, scene_generator):
    """Map noise of sigma 0.05 and 5 degree TCD noise keep the F-measure at 0.95 or above."""
    samples = {}
    for index, scene in enumerate(scenes):
        rng = scene_generator.rng(index, NOISE_STREAM)
        noisy = add_noise(scene.labels.as_bundle(), 0.05, 5.0, rng)
        samples[scene.name] = (detect_pipeline(noisy), scene.polygons)
    result = evaluate_dataset(samples)
    assert result.f_measure >= 0.95
