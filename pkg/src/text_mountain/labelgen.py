"""Ground-truth TS, TCBP and TCD maps from text polygon annotations.

Maps are produced at full image resolution and sampled at pixel centers
``(x + 0.5, y + 0.5)``. TCD is kept in true ``[-1, 1]`` vector form; the sigmoid
encoding used by a network head lives in :mod:`text_mountain.loss`.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from text_mountain.errors import GeometryError
from text_mountain.geometry import (
    FloatArray,
    Point,
    PolygonKind,
    TextPolygon,
    center_dirs_from_side,
    closest_on_side_many,
    interp_units_many,
    perp_vectors_quad_many,
    points_in_polygon,
    quad_side_directions,
    smooth_side,
)
from text_mountain.maps import InstanceMap, MapBundle, RasterMap

logger = logging.getLogger(__name__)

# Text whose height at its interior point is below this is marked ignore.
MIN_TEXT_HEIGHT = 10.0
MIN_HEIGHT = 1e-6
MIN_THRUST = 1e-9


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Ground-truth bundle for one image."""

    ts: RasterMap
    tcbp: RasterMap
    tcd: RasterMap
    ignore: NDArray[np.bool_]
    instance_gt: InstanceMap
    skipped: int = 0

    @property
    def size(self) -> tuple[int, int]:
        return self.ts.size

    def as_bundle(self) -> MapBundle:
        return MapBundle(ts=self.ts, tcbp=self.tcbp, tcd=self.tcd)


@dataclass(frozen=True, eq=False)
class _Distances:
    """Per-point side distances and unit thrust directions for one polygon."""

    dist: FloatArray  # (4, n)
    dirs: FloatArray  # (4, n, 2)


def _quad_distances(poly: TextPolygon, pts: FloatArray) -> _Distances:
    vectors = perp_vectors_quad_many(poly, pts)
    return _Distances(np.linalg.norm(vectors, axis=-1), quad_side_directions(poly, vectors))


def _curved_distances(poly: TextPolygon, pts: FloatArray) -> _Distances:
    dist = np.empty((4, len(pts)))
    dirs = np.empty((4, len(pts), 2))
    for i, side in enumerate(poly.sides()):
        smoothed = smooth_side(side)
        _, c, seg, t = closest_on_side_many(side, pts)
        dist[i] = c
        dirs[i] = center_dirs_from_side(interp_units_many(smoothed, seg, t))
    return _Distances(dist, dirs)


def _distances(poly: TextPolygon, pts: FloatArray) -> _Distances:
    if poly.kind is PolygonKind.QUAD:
        return _quad_distances(poly, pts)
    return _curved_distances(poly, pts)


def _heights(dist: FloatArray) -> FloatArray:
    return np.minimum(dist[0] + dist[2], dist[1] + dist[3])


def _tcbp(dist: FloatArray, height: FloatArray) -> FloatArray:
    safe = np.where(height < MIN_HEIGHT, 1.0, height)
    value = np.clip(2.0 * dist.min(axis=0) / safe, 0.0, 1.0)
    return np.where(height < MIN_HEIGHT, 0.0, value)


def _tcd(d: _Distances, height: FloatArray) -> FloatArray:
    weights = np.maximum(height[None, :] / 2.0 - d.dist, 0.0)
    thrust = np.einsum("sn,snj->nj", weights, d.dirs)
    norms = np.hypot(thrust[:, 0], thrust[:, 1])
    safe = np.where(norms < MIN_THRUST, 1.0, norms)
    return np.where((norms < MIN_THRUST)[:, None], 0.0, thrust / safe[:, None])


def polygon_height(poly: TextPolygon, p: Point) -> float:
    """Text height ``min(d_1 + d_3, d_2 + d_4)`` measured at ``p``."""
    d = _distances(poly, p.as_array()[None, :])
    return float(_heights(d.dist)[0])


def _single(poly: TextPolygon, p: Point, kind: PolygonKind) -> tuple[_Distances, float]:
    if poly.kind is not kind:
        raise GeometryError(f"Expected a {kind.value} polygon, got {poly.kind.value}.")
    d = _distances(poly, p.as_array()[None, :])
    height = float(_heights(d.dist)[0])
    if height < MIN_HEIGHT:
        raise GeometryError(f"Text height vanishes at ({p.x}, {p.y}); polygon is degenerate.")
    return d, height


def tcbp_quad(poly: TextPolygon, p: Point) -> float:
    """Center-border probability ``2 * min(|a_i|) / h`` of a point inside a quad."""
    d, height = _single(poly, p, PolygonKind.QUAD)
    return float(_tcbp(d.dist, np.array([height]))[0])


def tcd_quad(poly: TextPolygon, p: Point) -> FloatArray:
    """Normalized thrust of the four sides at ``p``; ``(0, 0)`` when the thrust vanishes."""
    d, height = _single(poly, p, PolygonKind.QUAD)
    return _tcd(d, np.array([height]))[0]


def tcbp_curved(poly: TextPolygon, p: Point) -> float:
    """Center-border probability using closest points on the (possibly curved) sides."""
    d, height = _single(poly, p, PolygonKind.CURVED14)
    return float(_tcbp(d.dist, np.array([height]))[0])


def tcd_curved(poly: TextPolygon, p: Point) -> FloatArray:
    """Thrust of the four sides along their smoothed inward directions at the closest points."""
    d, height = _single(poly, p, PolygonKind.CURVED14)
    return _tcd(d, np.array([height]))[0]


@dataclass(frozen=True, eq=False)
class _Field:
    """Pixels covered by one polygon within its bounding box, and their labels."""

    rows: NDArray[np.intp]
    cols: NDArray[np.intp]
    tcbp: FloatArray
    tcd: FloatArray


def _covered_pixels(
    poly: TextPolygon, width: int, height: int
) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    min_x, min_y = poly.vertices.min(axis=0)
    max_x, max_y = poly.vertices.max(axis=0)
    c0 = max(int(np.floor(min_x - 0.5)), 0)
    c1 = min(int(np.ceil(max_x - 0.5)), width - 1)
    r0 = max(int(np.floor(min_y - 0.5)), 0)
    r1 = min(int(np.ceil(max_y - 0.5)), height - 1)
    if c1 < c0 or r1 < r0:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    rr, cc = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    rr, cc = rr.ravel(), cc.ravel()
    inside = points_in_polygon(poly, cc + 0.5, rr + 0.5)
    return rr[inside], cc[inside]


def _polygon_field(poly: TextPolygon, width: int, height: int, with_labels: bool) -> _Field:
    rows, cols = _covered_pixels(poly, width, height)
    if not with_labels or rows.size == 0:
        return _Field(rows, cols, np.zeros(rows.size), np.zeros((rows.size, 2)))
    pts = np.stack([cols + 0.5, rows + 0.5], axis=1)
    d = _distances(poly, pts)
    h = _heights(d.dist)
    return _Field(rows, cols, _tcbp(d.dist, h), _tcd(d, h))


def is_too_small(poly: TextPolygon) -> bool:
    """True when the text height at the polygon's interior point is under 10 pixels."""
    return polygon_height(poly, poly.interior_point()) < MIN_TEXT_HEIGHT


def _build(
    polys: Sequence[TextPolygon],
    size: tuple[int, int],
    workers: int,
    with_labels: bool,
) -> LabelSet:
    width, height = size
    ts = np.zeros((height, width), dtype=np.float32)
    tcbp = np.zeros((height, width), dtype=np.float32)
    tcd = np.zeros((2, height, width), dtype=np.float32)
    ignore = np.zeros((height, width), dtype=bool)
    instances = np.zeros((height, width), dtype=np.int32)

    def task(poly: TextPolygon) -> tuple[_Field, bool] | None:
        try:
            care = not poly.ignore and not is_too_small(poly)
            return _polygon_field(poly, width, height, with_labels and care), care
        except GeometryError as e:
            logger.warning("Skipping malformed polygon: %s", e)
            return None

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        results = list(pool.map(task, polys))

    skipped = sum(r is None for r in results)
    positives: list[tuple[float, int, _Field]] = []
    next_id = 1
    for poly, result in zip(polys, results, strict=True):
        if result is None:
            continue
        field, care = result
        if care:
            positives.append((abs(poly.area), next_id, field))
            next_id += 1
        else:
            ignore[field.rows, field.cols] = True

    # Larger polygons first so the smaller (more specific) one wins on overlap.
    positives.sort(key=lambda item: (-item[0], item[1]))
    for _, instance_id, field in positives:
        ts[field.rows, field.cols] = 1.0
        instances[field.rows, field.cols] = instance_id
        tcbp[field.rows, field.cols] = field.tcbp
        tcd[:, field.rows, field.cols] = field.tcd.T

    if skipped:
        logger.warning("Skipped %d malformed polygon(s) of %d", skipped, len(polys))
    return LabelSet(
        ts=RasterMap(ts),
        tcbp=RasterMap(tcbp),
        tcd=RasterMap(tcd),
        ignore=ignore,
        instance_gt=InstanceMap(instances),
        skipped=skipped,
    )


def rasterize_ts(
    polys: Sequence[TextPolygon], size: tuple[int, int], workers: int = 1
) -> tuple[RasterMap, NDArray[np.bool_], InstanceMap]:
    """Text score, ignore mask and ground-truth instance ids.

    Args:
        polys: Annotated polygons; DO-NOT-CARE and under-height polygons feed the
            ignore mask instead of the text score.
        size: ``(width, height)`` of the image.
        workers: Threads used to rasterize polygons.

    Returns:
        tuple: ``(ts, ignore, instance_gt)``.
    """
    labels = _build(polys, size, workers, with_labels=False)
    return labels.ts, labels.ignore, labels.instance_gt


def generate_labels(
    annotations: Sequence[TextPolygon], size: tuple[int, int], workers: int = 1
) -> LabelSet:
    """Full ground-truth bundle for one image.

    TCD is computed at every text pixel; restricting it to the border happens in the
    loss. The output does not depend on ``workers``.

    Args:
        annotations: Annotated polygons for the image.
        size: ``(width, height)`` of the image.
        workers: Threads used to compute per-polygon fields.

    Returns:
        LabelSet: TS, TCBP, TCD, ignore mask and instance ids.
    """
    return _build(annotations, size, workers, with_labels=True)


def binary_center_map(tcbp: RasterMap, ts: RasterMap, gamma: float = 0.6) -> RasterMap:
    """Hard center/border classification ``TS * (TCBP > gamma)`` as a 0/1 map."""
    center = (ts.plane(0) > 0.5) & (tcbp.plane(0) > gamma)
    return RasterMap(center.astype(np.float32))
