"""Planar geometry for text polygons.

Coordinates are image pixels with x to the right and y down. Polygons are stored
clockwise as seen on screen, which is a positive shoelace area in these axes.
Every function here is pure; the ``*_many`` variants are the vectorized forms
used by label generation.
"""

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
import shapely
from numpy.typing import ArrayLike, NDArray
from shapely.geometry import LinearRing, Polygon

from text_mountain.errors import GeometryError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# Below this length a side or segment is considered degenerate.
MIN_SEGMENT_LENGTH = 1e-9
# Below this perpendicular distance the side's inward normal replaces a_i / |a_i|.
ZERO_DISTANCE = 1e-6


class PolygonKind(str, Enum):
    """Annotation style of a text polygon."""

    QUAD = "quad"
    CURVED14 = "curved14"

    @property
    def vertex_count(self) -> int:
        return 4 if self is PolygonKind.QUAD else 14

    @classmethod
    def from_vertex_count(cls, count: int) -> "PolygonKind":
        if count == 4:
            return cls.QUAD
        if count == 14:
            return cls.CURVED14
        raise GeometryError(f"Text polygons have 4 or 14 vertices, got {count}.")


@dataclass(frozen=True)
class Point:
    """A continuous image-space position."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"Point coordinates must be finite, got ({self.x}, {self.y}).")

    def as_array(self) -> FloatArray:
        """Coordinates as an array.

        Returns:
            FloatArray: ``[x, y]`` as float64.
        """
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class SideSet:
    """The four sides of a text polygon; sides 0/2 and 1/3 face each other."""

    sides: tuple[FloatArray, FloatArray, FloatArray, FloatArray]

    def __iter__(self) -> Iterator[FloatArray]:
        return iter(self.sides)

    def __getitem__(self, index: int) -> FloatArray:
        return self.sides[index]


@dataclass(frozen=True)
class SmoothedSide:
    """A side polyline with per-segment and per-point unit tangents."""

    points: FloatArray
    segment_units: FloatArray
    point_units: FloatArray


def signed_area(vertices: ArrayLike) -> float:
    """Shoelace area; positive for clockwise-on-screen order in y-down coordinates."""
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:, 0], v[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class TextPolygon:
    """An annotated text region.

    Attributes:
        kind: Quad (4 vertices) or Curved14 (two 7-point long sides).
        vertices: ``(n, 2)`` float64 array, clockwise on screen.
        ignore: True for DO-NOT-CARE regions.
    """

    kind: PolygonKind
    vertices: FloatArray
    ignore: bool = False

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise GeometryError(f"Vertices must have shape (n, 2), got {vertices.shape}.")
        if vertices.shape[0] != self.kind.vertex_count:
            raise GeometryError(
                f"A {self.kind.value} polygon needs {self.kind.vertex_count} vertices, "
                f"got {vertices.shape[0]}."
            )
        if not np.all(np.isfinite(vertices)):
            raise GeometryError("Polygon vertices must be finite.")
        area = signed_area(vertices)
        if abs(area) < MIN_SEGMENT_LENGTH:
            raise GeometryError("Polygon has zero area.")
        if not LinearRing(vertices).is_simple:
            raise GeometryError("Polygon boundary intersects itself.")
        if area < 0:
            vertices = vertices[::-1].copy()
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)

    @classmethod
    def from_coords(cls, coords: Sequence[float] | ArrayLike, ignore: bool = False) -> "TextPolygon":
        """Build a polygon from a flat ``x1, y1, ..., xn, yn`` list or an ``(n, 2)`` array.

        Raises:
            GeometryError: If the vertex count is not 4 or 14, or the polygon is invalid.
        """
        flat = np.asarray(coords, dtype=np.float64).reshape(-1)
        if flat.size % 2:
            raise GeometryError(f"Coordinate count must be even, got {flat.size}.")
        vertices = flat.reshape(-1, 2)
        return cls(PolygonKind.from_vertex_count(len(vertices)), vertices, ignore)

    @property
    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.vertices]

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @cached_property
    def shape(self) -> Polygon:
        """Prepared shapely polygon for fast point queries."""
        poly = Polygon(self.vertices)
        shapely.prepare(poly)
        return poly

    def sides(self) -> SideSet:
        """Split the boundary into four sides in annotation order."""
        v = self.vertices
        if self.kind is PolygonKind.QUAD:
            return SideSet(
                (v[[0, 1]], v[[1, 2]], v[[2, 3]], v[[3, 0]]),
            )
        return SideSet((v[0:7], v[[6, 7]], v[7:14], v[[13, 0]]))

    def interior_point(self) -> Point:
        """The centroid when it lies inside, otherwise shapely's representative point."""
        centroid = self.shape.centroid
        if not point_in_polygon(self, Point(centroid.x, centroid.y)):
            centroid = self.shape.representative_point()
        return Point(float(centroid.x), float(centroid.y))


def _side_frame(a: FloatArray, b: FloatArray) -> tuple[FloatArray, float]:
    edge = b - a
    length = float(np.hypot(edge[0], edge[1]))
    if length < MIN_SEGMENT_LENGTH:
        raise GeometryError(f"Degenerate side from {a.tolist()} to {b.tolist()}.")
    return edge, length


def inward_normal(a: FloatArray, b: FloatArray) -> FloatArray:
    """Unit normal of side ``a -> b`` pointing into a clockwise polygon."""
    edge, length = _side_frame(a, b)
    return np.array([-edge[1], edge[0]]) / length


def perp_vectors_quad_many(poly: TextPolygon, points: FloatArray) -> FloatArray:
    """Vectors from each side's perpendicular foot to every point.

    Args:
        poly: A quad polygon.
        points: ``(n, 2)`` array of positions.

    Returns:
        FloatArray: ``(4, n, 2)`` array; ``[i, k]`` is ``a_i`` for point ``k``.

    Raises:
        GeometryError: If a side has zero length.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    out = np.empty((4, len(pts), 2), dtype=np.float64)
    for i, side in enumerate(poly.sides()):
        a = side[0]
        edge, length = _side_frame(side[0], side[1])
        rel = pts - a
        proj = (rel @ edge) / (length * length)
        out[i] = rel - proj[:, None] * edge[None, :]
    return out


def perp_vectors_quad(poly: TextPolygon, p: Point) -> FloatArray:
    """Perpendicular vectors ``a_1..a_4`` from the four supporting lines to ``p``.

    Returns:
        FloatArray: ``(4, 2)`` array in annotation side order.
    """
    if poly.kind is not PolygonKind.QUAD:
        raise GeometryError("perp_vectors_quad needs a quad polygon.")
    return perp_vectors_quad_many(poly, p.as_array()[None, :])[:, 0, :]


def quad_side_directions(poly: TextPolygon, vectors: FloatArray) -> FloatArray:
    """Unit directions ``a_i / |a_i|``, using the inward normal where ``|a_i|`` vanishes."""
    dist = np.linalg.norm(vectors, axis=-1)
    dirs = np.empty_like(vectors)
    for i, side in enumerate(poly.sides()):
        normal = inward_normal(side[0], side[1])
        near = dist[i] < ZERO_DISTANCE
        safe = np.where(near, 1.0, dist[i])
        dirs[i] = vectors[i] / safe[:, None]
        dirs[i][near] = normal
    return dirs


def closest_on_side_many(
    side: ArrayLike, points: ArrayLike
) -> tuple[FloatArray, FloatArray, NDArray[np.intp], FloatArray]:
    """Closest points on a polyline for many query points.

    Args:
        side: ``(m, 2)`` polyline with ``m >= 2``.
        points: ``(n, 2)`` query points.

    Returns:
        tuple: ``(b, c, segment, t)`` where ``b`` is ``(n, 2)``, ``c`` the distances,
        ``segment`` the index of the segment holding ``b`` (first one on ties) and ``t``
        the clamped position of ``b`` along that segment in ``[0, 1]``.
    """
    poly = np.asarray(side, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(poly) < 2:
        raise GeometryError("A side needs at least two points.")
    starts = poly[:-1]
    edges = poly[1:] - starts
    len2 = np.einsum("ij,ij->i", edges, edges)
    safe = np.where(len2 > 0, len2, 1.0)
    rel = pts[:, None, :] - starts[None, :, :]
    t = np.clip(np.einsum("nsj,sj->ns", rel, edges) / safe, 0.0, 1.0)
    t = np.where(len2[None, :] > 0, t, 0.0)
    foot = starts[None, :, :] + t[:, :, None] * edges[None, :, :]
    dist = np.hypot(pts[:, None, 0] - foot[..., 0], pts[:, None, 1] - foot[..., 1])
    seg = np.argmin(dist, axis=1)
    rows = np.arange(len(pts))
    return foot[rows, seg], dist[rows, seg], seg, t[rows, seg]


def closest_on_side(side: ArrayLike, p: Point) -> tuple[Point, float]:
    """Closest point ``b`` on a polyline to ``p`` and the distance ``c = |p - b|``."""
    b, c, _, _ = closest_on_side_many(side, p.as_array()[None, :])
    return Point(float(b[0, 0]), float(b[0, 1])), float(c[0])


def smooth_side(side: ArrayLike) -> SmoothedSide:
    """Unit tangents per segment and per point, averaging adjacent segments at inner points.

    Raises:
        GeometryError: On a zero-length segment, or adjacent segments pointing in
            opposite directions.
    """
    pts = np.asarray(side, dtype=np.float64)
    if len(pts) < 2:
        raise GeometryError("A side needs at least two points.")
    edges = np.diff(pts, axis=0)
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths < MIN_SEGMENT_LENGTH):
        raise GeometryError("Side contains a zero-length segment.")
    seg_units = edges / lengths[:, None]

    point_units = np.empty_like(pts)
    point_units[0] = seg_units[0]
    point_units[-1] = seg_units[-1]
    if len(pts) > 2:
        mean = seg_units[:-1] + seg_units[1:]
        norms = np.hypot(mean[:, 0], mean[:, 1])
        if np.any(norms < MIN_SEGMENT_LENGTH):
            raise GeometryError("Adjacent side segments point in opposite directions.")
        point_units[1:-1] = mean / norms[:, None]
    return SmoothedSide(points=pts, segment_units=seg_units, point_units=point_units)


def interp_units_many(side: SmoothedSide, segment: ArrayLike, t: ArrayLike) -> FloatArray:
    """Interpolated unit tangents at positions ``t`` along the given segments.

    With ``d_i = t * L`` and ``d_{i+1} = (1 - t) * L`` the weighted sum
    ``d_{i+1} f_i + d_i f_{i+1}`` is normalized; endpoints return the stored unit.
    """
    seg = np.asarray(segment, dtype=np.intp)
    tt = np.asarray(t, dtype=np.float64)
    f0 = side.point_units[seg]
    f1 = side.point_units[seg + 1]
    mix = (1.0 - tt)[:, None] * f0 + tt[:, None] * f1
    norms = np.hypot(mix[:, 0], mix[:, 1])
    if np.any(norms < MIN_SEGMENT_LENGTH):
        raise GeometryError("Interpolated side direction vanishes.")
    out = mix / norms[:, None]
    out = np.where((tt == 0.0)[:, None], f0, out)
    return np.where((tt == 1.0)[:, None], f1, out)


def interp_unit(side: SmoothedSide, b: Point) -> FloatArray:
    """Unit tangent at a point ``b`` lying on the smoothed side."""
    _, _, seg, t = closest_on_side_many(side.points, b.as_array()[None, :])
    return interp_units_many(side, seg, t)[0]


def center_dirs_from_side(f: ArrayLike) -> FloatArray:
    """Vectorized :func:`center_dir_from_side` over an ``(n, 2)`` array."""
    units = np.asarray(f, dtype=np.float64).reshape(-1, 2)
    theta = np.arctan2(units[:, 1], units[:, 0]) + np.pi / 2
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def center_dir_from_side(f: ArrayLike) -> FloatArray:
    """Rotate a side tangent a quarter turn so it points into a clockwise polygon."""
    return center_dirs_from_side(f)[0]


def point_in_polygon(poly: TextPolygon, p: Point) -> bool:
    """Inside test for a simple polygon; points on the boundary count as inside."""
    return bool(shapely.intersects_xy(poly.shape, p.x, p.y))


def points_in_polygon(poly: TextPolygon, xs: ArrayLike, ys: ArrayLike) -> NDArray[np.bool_]:
    """Vectorized :func:`point_in_polygon`."""
    return np.asarray(shapely.intersects_xy(poly.shape, xs, ys), dtype=bool)
