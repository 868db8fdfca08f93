"""Annotation text files: one polygon per line, ``x1,y1,...,xn,yn[,transcription]``.

A transcription of ``###`` marks a DO-NOT-CARE region; any other transcription is
discarded. A line with at least 28 leading numbers is a Curved14 polygon, otherwise
its first 8 numbers make a quad; the fields after the coordinates are the
transcription, numeric or not.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from shapely.errors import GEOSException

from text_mountain.errors import AnnotationError, TextMountainError
from text_mountain.geometry import PolygonKind, TextPolygon

logger = logging.getLogger(__name__)

DONT_CARE = "###"
QUAD_NUMBERS = 2 * PolygonKind.QUAD.vertex_count
CURVED_NUMBERS = 2 * PolygonKind.CURVED14.vertex_count


@dataclass(frozen=True)
class LineError:
    """A rejected annotation line."""

    line: int
    reason: str


def _split_fields(line: str, kind: PolygonKind | None) -> tuple[list[float], str]:
    # Fields past the coordinates form the transcription, even when numeric.
    tokens = line.split(",")
    numbers: list[float] = []
    for token in tokens:
        try:
            numbers.append(float(token))
        except ValueError:
            break
    if len(numbers) < QUAD_NUMBERS:
        raise AnnotationError(f"expected at least {QUAD_NUMBERS} numbers, got {len(numbers)}")
    count = CURVED_NUMBERS if len(numbers) >= CURVED_NUMBERS else QUAD_NUMBERS
    if kind is not None and count != 2 * kind.vertex_count:
        raise AnnotationError(f"expected {2 * kind.vertex_count} numbers for {kind.value}")
    return numbers[:count], ",".join(tokens[count:]).strip()


def parse_annotation_line(line: str, kind: PolygonKind | None = None) -> TextPolygon | None:
    """Parse one line; blank lines yield None.

    Raises:
        AnnotationError: If the line does not describe a usable polygon.
    """
    text = line.strip().lstrip("﻿")
    if not text:
        return None
    numbers, transcription = _split_fields(text, kind)
    try:
        return TextPolygon.from_coords(numbers, ignore=transcription == DONT_CARE)
    except (TextMountainError, GEOSException, ValueError) as e:
        raise AnnotationError(str(e)) from e


def parse_annotation_lines(
    lines: Iterable[str], kind: PolygonKind | None = None
) -> tuple[list[TextPolygon], list[LineError]]:
    """Parse many lines, collecting rejected ones instead of stopping.

    Returns:
        tuple: ``(polygons, errors)`` with 1-based line numbers in the errors.
    """
    polygons: list[TextPolygon] = []
    errors: list[LineError] = []
    for number, line in enumerate(lines, start=1):
        try:
            poly = parse_annotation_line(line, kind)
        except AnnotationError as e:
            errors.append(LineError(number, str(e)))
            continue
        if poly is not None:
            polygons.append(poly)
    return polygons, errors


def parse_annotations(path: str | Path, kind: PolygonKind | None = None) -> list[TextPolygon]:
    """Read an annotation file; malformed lines are logged with their line numbers.

    Args:
        path: UTF-8 annotation file.
        kind: Restrict lines to one polygon kind; None accepts both.

    Returns:
        list[TextPolygon]: Valid polygons, possibly empty.

    Raises:
        AnnotationError: If the file cannot be read.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise AnnotationError(f"Cannot read annotation file {path}: {e.strerror or e}") from e
    text = raw.decode("utf-8", errors="replace")
    polygons, errors = parse_annotation_lines(text.splitlines(), kind)
    for error in errors:
        logger.warning("%s:%d: %s", path, error.line, error.reason)
    return polygons


def _format_number(value: float) -> str:
    return np.format_float_positional(round(float(value), 2) + 0.0, trim="-")


def format_polygon(vertices: np.ndarray, tail: str | None = None) -> str:
    """Comma-joined coordinates with an optional trailing field."""
    fields = [_format_number(v) for v in np.asarray(vertices).reshape(-1)]
    if tail is not None:
        fields.append(tail)
    return ",".join(fields)


def format_annotations(polygons: Sequence[TextPolygon]) -> str:
    """Annotation file text for the given polygons (``###`` for DO-NOT-CARE)."""
    lines = [format_polygon(p.vertices, DONT_CARE if p.ignore else None) for p in polygons]
    return "".join(line + "\n" for line in lines)


def write_annotations(polygons: Sequence[TextPolygon], path: str | Path) -> None:
    Path(path).write_text(format_annotations(polygons), encoding="utf-8")
