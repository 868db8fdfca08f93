"""From predicted maps to scored text polygons.

Polygon fitting is local to this package: quads are minimum-area rotated
rectangles found with rotating calipers on the convex hull of pixel centers,
curved text uses a traced contour simplified to at most 14 vertices.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient
from skimage import measure

from text_mountain.config import DetectMode, GraphSource, GroupConfig
from text_mountain.errors import MapFormatError
from text_mountain.geometry import FloatArray, Point, signed_area
from text_mountain.grouping import (
    extract_peaks,
    filter_peaks,
    group_baseline,
    group_parallel,
    next_from_tcbp,
    next_from_tcd,
    score_instances,
    text_mask,
)
from text_mountain.maps import InstanceMap, MapBundle, RasterMap, as_plane

logger = logging.getLogger(__name__)

MIN_INSTANCE_AREA = 10
CONTOUR_TOLERANCE = 2.0
MAX_CURVED_VERTICES = 14


@dataclass(frozen=True, eq=False)
class Detection:
    """An output polygon (clockwise on screen) with its mean text score."""

    polygon: FloatArray
    score: float

    @property
    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.polygon]

    @property
    def area(self) -> float:
        return signed_area(self.polygon)


def _clockwise_from_top_left(corners: FloatArray) -> FloatArray:
    if signed_area(corners) < 0:
        corners = corners[::-1]
    start = int(np.argmin(corners[:, 0] + corners[:, 1]))
    return np.roll(corners, -start, axis=0)


def _candidate_angles(points: FloatArray) -> FloatArray:
    try:
        hull = points[ConvexHull(points).vertices]
    except (QhullError, ValueError):
        # Collinear or too few points: fall back to the principal direction.
        centered = points - points.mean(axis=0)
        if not np.any(centered):
            return np.array([0.0])
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        return np.array([0.0, np.mod(np.arctan2(vt[0, 1], vt[0, 0]), np.pi / 2)])
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), np.pi / 2)
    return np.unique(angles)


def min_area_rect(points: ArrayLike, pixel_count: int | None = None) -> FloatArray:
    """Minimum-area rotated rectangle around pixel centers.

    Args:
        points: ``(n, 2)`` pixel-center coordinates.
        pixel_count: Area the rectangle should cover; when given, every side is pushed
            out by the same margin (at most one pixel) so the rectangle area matches it.

    Returns:
        FloatArray: ``(4, 2)`` corners, clockwise on screen, starting near the top-left.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    best: tuple[float, float, FloatArray, FloatArray] | None = None
    for angle in _candidate_angles(pts):
        c, s = np.cos(angle), np.sin(angle)
        u = pts[:, 0] * c + pts[:, 1] * s
        v = -pts[:, 0] * s + pts[:, 1] * c
        lo = np.array([u.min(), v.min()])
        hi = np.array([u.max(), v.max()])
        area = float(np.prod(hi - lo))
        if best is None or area < best[0] - 1e-9:
            best = (area, float(angle), lo, hi)
    assert best is not None
    _, angle, lo, hi = best

    if pixel_count is not None:
        w0, h0 = hi - lo
        disc = (w0 + h0) ** 2 - 4.0 * (w0 * h0 - pixel_count)
        margin = (-(w0 + h0) + np.sqrt(max(disc, 0.0))) / 4.0
        margin = float(np.clip(margin, 0.0, 1.0))
        lo = lo - margin
        hi = hi + margin

    c, s = np.cos(angle), np.sin(angle)
    uv = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    corners = np.stack([uv[:, 0] * c - uv[:, 1] * s, uv[:, 0] * s + uv[:, 1] * c], axis=1)
    return _clockwise_from_top_left(corners)


def trace_contour(mask: NDArray[np.bool_], offset: tuple[int, int] = (0, 0)) -> FloatArray:
    """Outer boundary of a binary mask in image coordinates.

    The contour runs half-way between inside and outside pixel centers.

    Args:
        mask: Binary mask (rows, cols).
        offset: ``(col, row)`` of ``mask[0, 0]`` in the image.
    """
    padded = np.pad(mask.astype(np.float64), 1)
    contours = measure.find_contours(padded, 0.5)
    if not contours:
        return np.empty((0, 2))
    outer = max(contours, key=lambda c: abs(signed_area(c)))
    xs = outer[:, 1] - 1 + 0.5 + offset[0]
    ys = outer[:, 0] - 1 + 0.5 + offset[1]
    return np.stack([xs, ys], axis=1)


def simplify_contour(
    contour: FloatArray,
    tolerance: float = CONTOUR_TOLERANCE,
    max_vertices: int = MAX_CURVED_VERTICES,
) -> FloatArray:
    """Douglas-Peucker simplification, loosening the tolerance until ``max_vertices`` fit.

    Simplified vertices sit on the contour, so convex stretches lose area; the result
    is pushed outward with a mitred offset until it covers the contour's area again.
    """
    poly = Polygon(contour)
    if not poly.is_valid:
        poly = poly.buffer(0)
        if poly.geom_type != "Polygon":
            poly = max(poly.geoms, key=lambda g: g.area)
    simplified = poly
    tol = tolerance
    while True:
        simplified = poly.simplify(tol, preserve_topology=True)
        if len(simplified.exterior.coords) - 1 <= max_vertices:
            break
        tol *= 1.5
    deficit = poly.area - simplified.area
    if deficit > 0 and simplified.length > 0:
        grown = simplified.buffer(deficit / simplified.length, join_style="mitre", mitre_limit=2.0)
        if (
            grown.geom_type == "Polygon"
            and grown.is_valid
            and len(grown.exterior.coords) - 1 <= max_vertices
        ):
            simplified = grown
    simplified = orient(simplified, sign=1.0)
    return np.asarray(simplified.exterior.coords)[:-1]


def instance_to_polygons(
    inst: InstanceMap,
    ts: RasterMap | ArrayLike,
    mode: DetectMode = DetectMode.QUAD,
    min_area: int = MIN_INSTANCE_AREA,
) -> list[Detection]:
    """Fit one scored polygon per instance.

    Args:
        inst: Instance ids.
        ts: Text score used for the detection score (mean over instance pixels).
        mode: Quad (rotated rectangle) or curved (simplified contour).
        min_area: Instances with fewer pixels are dropped.

    Returns:
        list[Detection]: One detection per surviving instance, in label order.
    """
    score_map = as_plane(ts)
    detections: list[Detection] = []
    for index, window in enumerate(ndimage.find_objects(inst.labels), start=1):
        if window is None:
            continue
        local = inst.labels[window] == index
        count = int(local.sum())
        if count < min_area:
            continue
        rows, cols = np.nonzero(local)
        row0, col0 = window[0].start, window[1].start
        score = float(np.clip(score_map[window][local].mean(), 0.0, 1.0))
        if DetectMode(mode) is DetectMode.QUAD:
            centers = np.stack([cols + col0 + 0.5, rows + row0 + 0.5], axis=1)
            polygon = min_area_rect(centers, pixel_count=count)
        else:
            contour = trace_contour(local, offset=(col0, row0))
            if len(contour) < 3:
                continue
            polygon = simplify_contour(contour)
        detections.append(Detection(polygon, score))
    return detections


def detect_instances(
    maps: MapBundle, cfg: GroupConfig | None = None, workers: int | None = None
) -> InstanceMap:
    """Peaks, peak filtering, instance scoring, next-step graph and parallel climb.

    Raises:
        MapFormatError: If the TCD graph is requested but the bundle has no TCD map.
    """
    cfg = cfg or GroupConfig()
    if cfg.graph_source is GraphSource.TS:
        return group_baseline(maps.ts, cfg)
    peaks = extract_peaks(maps.tcbp, maps.ts, cfg)
    seeds = score_instances(filter_peaks(peaks.seeds, maps.tcbp, cfg), maps.ts, cfg)
    text = text_mask(maps.ts, cfg)
    if cfg.graph_source is GraphSource.TCD:
        if maps.tcd is None:
            raise MapFormatError("graph_source=tcd needs a TCD map.")
        next_map = next_from_tcd(maps.tcd)
    else:
        next_map = next_from_tcbp(maps.tcbp, text)
    return group_parallel(seeds, next_map, text, workers)


def detect_pipeline(
    maps: MapBundle,
    cfg: GroupConfig | None = None,
    mode: DetectMode = DetectMode.QUAD,
    workers: int | None = None,
) -> list[Detection]:
    """Predicted maps to scored polygons.

    Args:
        maps: TS, TCBP and optionally decoded TCD.
        cfg: Thresholds and graph source.
        mode: Output polygon shape.
        workers: Threads for the parallel climb.

    Returns:
        list[Detection]: Detections in instance order.
    """
    inst = detect_instances(maps, cfg, workers)
    detections = instance_to_polygons(inst, maps.ts, mode)
    logger.info("Detected %d text instance(s)", len(detections))
    return detections
