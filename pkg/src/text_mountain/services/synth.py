"""Seeded synthetic scenes and a noise model for imperfect predictions.

Scenes hold non-overlapping rotated rectangles and, optionally, ring-sector
curved texts. Every scene draws from its own ``(seed, index)`` random stream so a
scene does not depend on how many others are generated.
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Polygon

from text_mountain.errors import ConfigError, GeometryError
from text_mountain.geometry import PolygonKind, TextPolygon
from text_mountain.labelgen import LabelSet, generate_labels
from text_mountain.maps import MapBundle, RasterMap
from text_mountain.services.map_io import write_label_set, write_map_bundle

logger = logging.getLogger(__name__)

MIN_TEXT_PX = 12.0
MAX_TEXT_PX = 80.0
MAX_ASPECT = 10.0
# Free space kept around every text and from the image edge, in pixels.
SEPARATION = 2.0
ARC_POINTS = 7
NOISE_STREAM = 1


@dataclass(frozen=True)
class SynthConfig:
    """Scene size and content mix.

    Attributes:
        width: Image width in pixels.
        height: Image height in pixels.
        max_texts: Upper bound on texts per scene (at least one is attempted).
        curved_ratio: Probability that a text is a curved ring sector.
        dont_care_ratio: Probability that a text is marked ``###``.
        attempts: Placement tries per text before giving up on it.
    """

    width: int = 640
    height: int = 640
    max_texts: int = 8
    curved_ratio: float = 0.0
    dont_care_ratio: float = 0.0
    attempts: int = 50

    def __post_init__(self) -> None:
        if self.width < 32 or self.height < 32:
            raise ConfigError(f"Synthetic scenes need at least 32x32 pixels, got {self.width}x{self.height}.")
        if self.max_texts < 1 or self.attempts < 1:
            raise ConfigError("max_texts and attempts must be at least 1.")
        for name in ("curved_ratio", "dont_care_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}.")

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height


@dataclass(frozen=True, eq=False)
class Scene:
    """One synthetic image: its annotations and exact ground-truth maps."""

    name: str
    polygons: list[TextPolygon]
    labels: LabelSet = field(repr=False)

    @property
    def size(self) -> tuple[int, int]:
        return self.labels.size


def _round(vertices: np.ndarray) -> np.ndarray:
    # Annotation files keep two decimals; labels are built from the same values.
    return np.round(vertices, 2)


class SyntheticSceneGenerator:
    """Random text layouts for round-trip and robustness checks."""

    def __init__(self, config: SynthConfig | None = None, seed: int = 0) -> None:
        self.config = config or SynthConfig()
        self.seed = seed

    def rng(self, index: int, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, index, stream])

    def random_quad(self, rng: np.random.Generator) -> TextPolygon:
        """A rotated rectangle: height in [12, 80], aspect in [1, 10], any angle."""
        cfg = self.config
        text_h = rng.uniform(MIN_TEXT_PX, MAX_TEXT_PX)
        text_w = text_h * rng.uniform(1.0, MAX_ASPECT)
        angle = rng.uniform(0.0, 2 * np.pi)
        cx = rng.uniform(0.0, cfg.width)
        cy = rng.uniform(0.0, cfg.height)
        local = np.array(
            [[-text_w, -text_h], [text_w, -text_h], [text_w, text_h], [-text_w, text_h]]
        ) / 2.0
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        vertices = local @ rot.T + [cx, cy]
        return TextPolygon(PolygonKind.QUAD, _round(vertices))

    def random_curved(self, rng: np.random.Generator) -> TextPolygon:
        """A ring sector: 7-point outer arc then 7-point inner arc, thickness >= 12."""
        cfg = self.config
        thickness = rng.uniform(MIN_TEXT_PX, MAX_TEXT_PX / 2)
        r_mid = rng.uniform(max(thickness, 20.0), max(thickness, 20.0) + 150.0)
        min_span = 2.0 * thickness / r_mid
        span = rng.uniform(min_span, max(min_span, 2.5))
        start = rng.uniform(0.0, 2 * np.pi)
        cx = rng.uniform(0.0, cfg.width)
        cy = rng.uniform(0.0, cfg.height)
        angles = start + np.linspace(0.0, span, ARC_POINTS)
        outer = r_mid + thickness / 2
        inner = r_mid - thickness / 2
        outer_arc = np.stack([cx + outer * np.cos(angles), cy + outer * np.sin(angles)], axis=1)
        inner_arc = np.stack(
            [cx + inner * np.cos(angles[::-1]), cy + inner * np.sin(angles[::-1])], axis=1
        )
        return TextPolygon(PolygonKind.CURVED14, _round(np.vstack([outer_arc, inner_arc])))

    def _fits(self, shape: Polygon, placed: list[Polygon]) -> bool:
        cfg = self.config
        x0, y0, x1, y1 = shape.bounds
        if x0 < SEPARATION or y0 < SEPARATION:
            return False
        if x1 > cfg.width - SEPARATION or y1 > cfg.height - SEPARATION:
            return False
        grown = shape.buffer(SEPARATION)
        return not any(grown.intersects(other) for other in placed)

    def polygons(self, index: int) -> list[TextPolygon]:
        """The annotations of scene ``index``."""
        cfg = self.config
        rng = self.rng(index)
        wanted = int(rng.integers(1, cfg.max_texts + 1))
        placed: list[Polygon] = []
        polygons: list[TextPolygon] = []
        for _ in range(wanted):
            curved = rng.random() < cfg.curved_ratio
            dont_care = rng.random() < cfg.dont_care_ratio
            for _ in range(cfg.attempts):
                try:
                    poly = self.random_curved(rng) if curved else self.random_quad(rng)
                except GeometryError:
                    continue
                if self._fits(poly.shape, placed):
                    placed.append(poly.shape.buffer(SEPARATION))
                    polygons.append(
                        TextPolygon(poly.kind, poly.vertices, ignore=dont_care)
                    )
                    break
        logger.debug("Scene %d: placed %d of %d text(s)", index, len(polygons), wanted)
        return polygons

    def scene(self, index: int, workers: int = 1) -> Scene:
        polygons = self.polygons(index)
        labels = generate_labels(polygons, self.config.size, workers=workers)
        return Scene(scene_name(index), polygons, labels)

    def scenes(self, count: int, workers: int = 1) -> Iterator[Scene]:
        for index in range(count):
            yield self.scene(index, workers)


def scene_name(index: int) -> str:
    return f"scene_{index:03d}"


def _rotate(vectors: np.ndarray, angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    ux, uy = vectors
    return np.stack([c * ux - s * uy, s * ux + c * uy])


def add_noise(
    maps: MapBundle,
    sigma: float,
    angle_sigma_deg: float = 5.0,
    rng: np.random.Generator | None = None,
) -> MapBundle:
    """Simulated network output: clipped Gaussian on TS/TCBP, Gaussian TCD rotation.

    Args:
        maps: Clean maps.
        sigma: Standard deviation of the additive noise on TS and TCBP.
        angle_sigma_deg: Standard deviation of the TCD rotation, in degrees.
        rng: Random stream; a fresh unseeded one when omitted.

    Returns:
        MapBundle: Noisy copy; the input is not modified.
    """
    if sigma < 0 or angle_sigma_deg < 0:
        raise ConfigError("Noise levels must be non-negative.")
    rng = rng or np.random.default_rng()

    def jitter(raster: RasterMap) -> RasterMap:
        noise = rng.normal(0.0, sigma, raster.data.shape) if sigma else 0.0
        return RasterMap(np.clip(raster.data + noise, 0.0, 1.0))

    ts = jitter(maps.ts)
    tcbp = jitter(maps.tcbp)
    tcd = None
    if maps.tcd is not None:
        data = maps.tcd.data.astype(np.float64)
        if angle_sigma_deg:
            angles = np.deg2rad(rng.normal(0.0, angle_sigma_deg, data.shape[1:]))
            data = data.copy()
            data[:2] = _rotate(data[:2], angles)
        tcd = RasterMap(data)
    return MapBundle(ts, tcbp, tcd)


def write_scene(
    scene: Scene, root: str | Path, predicted: MapBundle | None = None
) -> Path:
    """Write ``root/<scene name>`` holding labels and ``gt.txt``.

    When ``predicted`` is given its TS, TCBP and TCD replace the exact maps, so the
    directory reads as a prediction while ``gt.txt`` stays exact.
    """
    directory = write_label_set(scene.labels, Path(root) / scene.name, scene.polygons)
    if predicted is not None:
        write_map_bundle(predicted, directory)
    return directory
