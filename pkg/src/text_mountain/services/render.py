"""Render maps as P6 portable pixmaps.

Single-channel maps are drawn in grayscale, two-channel TCD maps on an angle-hued
color wheel (brightness is the vector length), and instance maps with one distinct
light color per id on a black background.
"""

from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb
from numpy.typing import NDArray
from PIL import Image

from text_mountain.maps import InstanceMap, RasterMap

# Instance ids are scrambled by an odd multiplier modulo 2**21 (a bijection), and
# the 21 bits are split into three 7-bit channels lifted to 128..255.
PALETTE_BITS = 7
PALETTE_SIZE = 1 << (3 * PALETTE_BITS)
PALETTE_MULTIPLIER = 0x9E3779


def _to_uint8(rgb: NDArray[np.floating]) -> NDArray[np.uint8]:
    return np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def grayscale_rgb(plane: NDArray[np.floating]) -> NDArray[np.uint8]:
    gray = _to_uint8(np.nan_to_num(plane))
    return np.repeat(gray[:, :, None], 3, axis=2)


def direction_rgb(raster: RasterMap) -> NDArray[np.uint8]:
    """Hue from the vector angle, value from its length (zero vectors are black)."""
    ux = np.nan_to_num(raster.plane(0).astype(np.float64))
    uy = np.nan_to_num(raster.plane(1).astype(np.float64))
    hue = np.mod(np.arctan2(uy, ux), 2 * np.pi) / (2 * np.pi)
    value = np.clip(np.hypot(ux, uy), 0.0, 1.0)
    hsv = np.stack([hue, np.ones_like(hue), value], axis=-1)
    return _to_uint8(hsv_to_rgb(hsv))


def instance_palette(count: int) -> NDArray[np.uint8]:
    """Distinct colors for instance ids.

    Args:
        count: Number of instances.

    Returns:
        NDArray[np.uint8]: ``count + 1`` RGB rows; row 0 is black and row k, the
        color of instance k, has every channel in 128..255.

    Raises:
        ValueError: If there are more instances than distinct colors.
    """
    if not 0 <= count < PALETTE_SIZE:
        raise ValueError(f"Can color at most {PALETTE_SIZE - 1} instances, got {count}.")
    mask = (1 << PALETTE_BITS) - 1
    codes = (np.arange(1, count + 1, dtype=np.int64) * PALETTE_MULTIPLIER) % PALETTE_SIZE
    channels = [(codes >> (PALETTE_BITS * k)) & mask for k in range(3)]
    colors = (np.stack(channels, axis=-1) + (1 << PALETTE_BITS)).astype(np.uint8)
    return np.vstack([np.zeros((1, 3), dtype=np.uint8), colors])


def instance_rgb(inst: InstanceMap) -> NDArray[np.uint8]:
    return instance_palette(inst.count)[inst.labels]


def render_image(target: RasterMap | InstanceMap) -> Image.Image:
    """An RGB Pillow image of a raster or instance map."""
    if isinstance(target, InstanceMap):
        rgb = instance_rgb(target)
    elif target.channels >= 2:
        rgb = direction_rgb(target)
    else:
        rgb = grayscale_rgb(target.plane(0))
    return Image.fromarray(np.ascontiguousarray(rgb))


def render_maps(target: RasterMap | InstanceMap, path: str | Path) -> Path:
    """Write ``target`` as a binary (P6) PPM file."""
    out = Path(path)
    render_image(target).save(out, format="PPM")
    return out
