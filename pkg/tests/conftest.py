"""Shared fixtures for the text_mountain test suite."""

import numpy as np
import pytest

from text_mountain.geometry import TextPolygon


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator so property loops are reproducible."""
    return np.random.default_rng(20240607)


@pytest.fixture
def rect() -> TextPolygon:
    """The 100x20 axis-aligned rectangle used throughout the examples."""
    return TextPolygon.from_coords([0, 0, 100, 0, 100, 20, 0, 20])


@pytest.fixture
def unit_square() -> TextPolygon:
    return TextPolygon.from_coords([0, 0, 1, 0, 1, 1, 0, 1])


def rect_as_curved(x0: float, y0: float, x1: float, y1: float) -> TextPolygon:
    """An axis-aligned rectangle written as Curved14 with collinear subdivision points."""
    xs = np.linspace(x0, x1, 7)
    top = np.stack([xs, np.full(7, y0)], axis=1)
    bottom = np.stack([xs[::-1], np.full(7, y1)], axis=1)
    return TextPolygon.from_coords(np.vstack([top, bottom]))


def ring_sector(
    cx: float, cy: float, r_in: float, r_out: float, start: float, stop: float
) -> TextPolygon:
    """Curved14 annulus sector: outer arc start->stop, then inner arc stop->start."""
    angles = np.linspace(start, stop, 7)
    outer = np.stack([cx + r_out * np.cos(angles), cy + r_out * np.sin(angles)], axis=1)
    inner = np.stack(
        [cx + r_in * np.cos(angles[::-1]), cy + r_in * np.sin(angles[::-1])], axis=1
    )
    return TextPolygon.from_coords(np.vstack([outer, inner]))
