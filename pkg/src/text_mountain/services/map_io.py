"""TMM1 map containers, map directories and detection files.

A TMM1 file is a 16-byte header (magic ``TMM1``, then little-endian u32 width,
height and channels) followed by ``channels * height * width`` little-endian
float32 values, channel-major and row-major within a channel.

A map directory holds one scene: ``ts.tmm``, ``tcbp.tmm`` and optionally ``tcd.tmm``;
label directories add ``ignore.tmm``, ``instances.tmm`` and the ``gt.txt`` annotations.
"""

import logging
import struct
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from text_mountain.detect import Detection
from text_mountain.errors import AnnotationError, MapFormatError
from text_mountain.geometry import TextPolygon
from text_mountain.labelgen import LabelSet
from text_mountain.maps import InstanceMap, MapBundle, RasterMap
from text_mountain.services.annotations import format_polygon, parse_annotations, write_annotations

logger = logging.getLogger(__name__)

MAGIC = b"TMM1"
HEADER = struct.Struct("<4sIII")
PAYLOAD_DTYPE = np.dtype("<f4")
# Largest payload accepted, in values; keeps byte sizes inside a signed 64-bit range.
MAX_VALUES = 2**61

TS_FILE = "ts.tmm"
TCBP_FILE = "tcbp.tmm"
TCD_FILE = "tcd.tmm"
IGNORE_FILE = "ignore.tmm"
INSTANCES_FILE = "instances.tmm"
GT_FILE = "gt.txt"
SCENE_HEADER = "# "


def encode_map(raster: RasterMap) -> bytes:
    """Serialize a raster to TMM1 bytes."""
    header = HEADER.pack(MAGIC, raster.width, raster.height, raster.channels)
    return header + raster.data.astype(PAYLOAD_DTYPE, copy=False).tobytes(order="C")


def decode_map(buf: bytes) -> RasterMap:
    """Parse TMM1 bytes.

    Raises:
        MapFormatError: On bad magic, a zero-channel header, oversized dimensions,
            or a payload whose length does not match the header.
    """
    if len(buf) < HEADER.size:
        raise MapFormatError(
            f"Truncated TMM1 header: expected {HEADER.size} bytes, got {len(buf)}."
        )
    magic, width, height, channels = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise MapFormatError(f"Bad magic {magic!r}; expected {MAGIC!r}.")
    if channels == 0:
        raise MapFormatError("TMM1 header declares zero channels.")
    values = width * height * channels
    if values > MAX_VALUES:
        raise MapFormatError(f"TMM1 dimensions {width}x{height}x{channels} overflow.")
    expected = HEADER.size + PAYLOAD_DTYPE.itemsize * values
    if len(buf) != expected:
        kind = "Truncated" if len(buf) < expected else "Oversized"
        raise MapFormatError(
            f"{kind} TMM1 file: expected {expected} bytes, got {len(buf)}."
        )
    data = np.frombuffer(buf, dtype=PAYLOAD_DTYPE, offset=HEADER.size)
    return RasterMap(data.reshape(channels, height, width).astype(np.float32))


def write_map(raster: RasterMap, path: str | Path) -> None:
    Path(path).write_bytes(encode_map(raster))


def read_map(path: str | Path) -> RasterMap:
    """Read a TMM1 file.

    Raises:
        MapFormatError: If the contents are not a valid container.
        OSError: If the file cannot be read.
    """
    try:
        return decode_map(Path(path).read_bytes())
    except MapFormatError as e:
        raise MapFormatError(f"{path}: {e}") from e


def write_map_bundle(maps: MapBundle, directory: str | Path) -> Path:
    """Write TS, TCBP and (when present) TCD into ``directory``."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    write_map(maps.ts, root / TS_FILE)
    write_map(maps.tcbp, root / TCBP_FILE)
    if maps.tcd is not None:
        write_map(maps.tcd, root / TCD_FILE)
    return root


def read_map_bundle(directory: str | Path) -> MapBundle:
    """Read a map directory; ``tcd.tmm`` is optional."""
    root = Path(directory)
    tcd_path = root / TCD_FILE
    return MapBundle(
        ts=read_map(root / TS_FILE),
        tcbp=read_map(root / TCBP_FILE),
        tcd=read_map(tcd_path) if tcd_path.exists() else None,
    )


def write_label_set(
    labels: LabelSet,
    directory: str | Path,
    polygons: Sequence[TextPolygon] | None = None,
) -> Path:
    """Write a full ground-truth directory, including ``gt.txt`` when polygons are given."""
    root = write_map_bundle(labels.as_bundle(), directory)
    write_map(RasterMap(labels.ignore.astype(np.float32)), root / IGNORE_FILE)
    write_map(labels.instance_gt.to_raster(), root / INSTANCES_FILE)
    if polygons is not None:
        write_annotations(polygons, root / GT_FILE)
    return root


def read_label_set(directory: str | Path) -> LabelSet:
    """Read a ground-truth directory written by :func:`write_label_set`.

    Raises:
        MapFormatError: If the directory has no TCD map or a map is malformed.
    """
    root = Path(directory)
    bundle = read_map_bundle(root)
    if bundle.tcd is None:
        raise MapFormatError(f"{root} has no {TCD_FILE}; it is not a label directory.")
    ignore_path = root / IGNORE_FILE
    ignore = (
        read_map(ignore_path).plane(0) > 0.5
        if ignore_path.exists()
        else np.zeros((bundle.ts.height, bundle.ts.width), dtype=bool)
    )
    inst_path = root / INSTANCES_FILE
    instances = (
        InstanceMap.from_raster(read_map(inst_path))
        if inst_path.exists()
        else InstanceMap.empty(bundle.ts.width, bundle.ts.height)
    )
    return LabelSet(bundle.ts, bundle.tcbp, bundle.tcd, ignore, instances)


def read_ground_truth(directory: str | Path) -> list[TextPolygon]:
    """Annotations of a scene directory (its ``gt.txt``), or of an annotation file."""
    path = Path(directory)
    return parse_annotations(path / GT_FILE if path.is_dir() else path)


def is_scene_dir(path: Path) -> bool:
    """Whether ``path`` holds a scene.

    Args:
        path: Directory to check.

    Returns:
        bool: True when ``path`` is a directory with a TS map in it.
    """
    return path.is_dir() and (path / TS_FILE).exists()


def scene_dirs(root: str | Path) -> list[Path]:
    """The scene directory itself, or its scene subdirectories sorted by name.

    Raises:
        MapFormatError: If no scene directory is found.
    """
    path = Path(root)
    if is_scene_dir(path):
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"No such map directory: {path}")
    scenes = sorted(p for p in path.iterdir() if is_scene_dir(p))
    if not scenes:
        raise MapFormatError(f"{path} holds no {TS_FILE} and no scene subdirectories.")
    return scenes


def format_score(score: float) -> str:
    """Detection score as text.

    Args:
        score: Instance score.

    Returns:
        str: The score rounded to four decimals, without trailing zeros or a negative zero.
    """
    return np.format_float_positional(round(float(score), 4) + 0.0, trim="-")


def format_detections(dets: Sequence[Detection]) -> str:
    """One ``x1,y1,...,xn,yn,score`` line per detection."""
    return "".join(format_polygon(d.polygon, format_score(d.score)) + "\n" for d in dets)


def write_detections(
    dets: Sequence[Detection] | Mapping[str, Sequence[Detection]],
    path: str | Path,
) -> None:
    """Write detections; a mapping writes one ``# name`` section per scene."""
    if isinstance(dets, Mapping):
        text = "".join(
            f"{SCENE_HEADER}{name}\n" + format_detections(scene) for name, scene in dets.items()
        )
    else:
        text = format_detections(dets)
    Path(path).write_text(text, encoding="utf-8")


def _parse_detection(line: str, number: int) -> Detection:
    try:
        values = [float(v) for v in line.split(",")]
    except ValueError as e:
        raise AnnotationError(f"line {number}: non-numeric field") from e
    if len(values) < 7 or len(values) % 2 == 0:
        raise AnnotationError(f"line {number}: expected 2n coordinates and a score, n >= 3")
    return Detection(np.asarray(values[:-1], dtype=np.float64).reshape(-1, 2), values[-1])


def read_detections(path: str | Path) -> dict[str, list[Detection]]:
    """Read a detection file into ``{scene name: detections}``.

    A file without section headers yields a single entry under ``""``.

    Raises:
        AnnotationError: If the file cannot be read or a line is malformed.
    """
    try:
        text = Path(path).read_text(encoding="utf-8", errors="replace")
    except OSError as e:
        raise AnnotationError(f"Cannot read detection file {path}: {e.strerror or e}") from e
    scenes: dict[str, list[Detection]] = {}
    current = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(SCENE_HEADER.strip()):
            current = line[1:].strip()
            scenes.setdefault(current, [])
            continue
        scenes.setdefault(current, []).append(_parse_detection(line, number))
    logger.debug("Read %d detection section(s) from %s", len(scenes), path)
    return scenes
