"""Raster containers shared by label generation, losses, grouping and I/O."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from text_mountain.errors import MapFormatError


@dataclass(frozen=True, eq=False)
class RasterMap:
    """A ``W x H x C`` float32 raster stored planar: ``data[channel, row, col]``."""

    data: NDArray[np.float32]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[None, :, :]
        if data.ndim != 3:
            raise MapFormatError(f"RasterMap data must be 2-D or 3-D, got shape {data.shape}.")
        if data.shape[0] < 1:
            raise MapFormatError("RasterMap needs at least one channel.")
        object.__setattr__(self, "data", np.ascontiguousarray(data))

    @classmethod
    def zeros(cls, width: int, height: int, channels: int = 1) -> "RasterMap":
        return cls(np.zeros((channels, height, width), dtype=np.float32))

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def plane(self, channel: int = 0) -> NDArray[np.float32]:
        """One channel of the map.

        Args:
            channel: Channel index.

        Returns:
            NDArray[np.float32]: The ``(H, W)`` plane, a view into ``data``.
        """
        return self.data[channel]

    def vectors(self) -> NDArray[np.float32]:
        """The first two channels as an ``(H, W, 2)`` array of ``(x, y)`` vectors."""
        return np.moveaxis(self.data[:2], 0, -1)


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """Per-pixel text-instance ids; 0 is background or uncolored."""

    labels: NDArray[np.int32]

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise MapFormatError(f"InstanceMap labels must be 2-D, got shape {labels.shape}.")
        if labels.size and labels.min() < 0:
            raise MapFormatError("InstanceMap labels must be non-negative.")
        object.__setattr__(self, "labels", np.ascontiguousarray(labels, dtype=np.int32))

    @classmethod
    def empty(cls, width: int, height: int) -> "InstanceMap":
        return cls(np.zeros((height, width), dtype=np.int32))

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def count(self) -> int:
        """Largest label id, which is the instance count when ids are dense."""
        return int(self.labels.max()) if self.labels.size else 0

    def to_raster(self) -> RasterMap:
        return RasterMap(self.labels.astype(np.float32))

    @classmethod
    def from_raster(cls, raster: RasterMap) -> "InstanceMap":
        values = raster.plane(0)
        labels = np.rint(values).astype(np.int32)
        if not np.array_equal(labels, values) or (labels.size and labels.min() < 0):
            raise MapFormatError("Map does not hold non-negative integer instance ids.")
        return cls(labels)


@dataclass(frozen=True, eq=False)
class MapBundle:
    """Predicted (or ground-truth) maps for one image; ``tcd`` is in true [-1, 1] form."""

    ts: RasterMap
    tcbp: RasterMap
    tcd: RasterMap | None = None

    def __post_init__(self) -> None:
        sizes = {self.ts.size, self.tcbp.size}
        if self.tcd is not None:
            sizes.add(self.tcd.size)
            if self.tcd.channels < 2:
                raise MapFormatError("TCD map needs two channels.")
        if len(sizes) != 1:
            raise MapFormatError(f"Map sizes disagree: {sorted(sizes)}.")

    @property
    def size(self) -> tuple[int, int]:
        return self.ts.size


def as_plane(value: RasterMap | ArrayLike) -> NDArray[np.float64]:
    """A single 2-D float64 plane from a RasterMap or array."""
    if isinstance(value, RasterMap):
        return value.plane(0).astype(np.float64)
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise MapFormatError(f"Expected a 2-D map, got shape {arr.shape}.")
    return arr
