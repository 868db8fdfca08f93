"""Mountain-climbing pixel grouping.

Peaks (``TCBP > gamma`` on text) are labeled as connected components, then every
other text pixel follows a per-pixel next-step graph until it reaches a colored
pixel or a blocked route. The climb runs as a numba ``prange`` loop over start
pixels that share a color map and a block map; both only ever move from unset
to a final value, so the result does not depend on scheduling.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

try:
    import numba
    from numba import njit, prange
except ImportError as e:
    raise ImportError("numba is required for the parallel climb. Install with: pip install numba") from e

from text_mountain.config import GroupConfig
from text_mountain.maps import InstanceMap, RasterMap, as_plane

logger = logging.getLogger(__name__)

# 4-connectivity: diagonal-touching peaks of adjacent lines stay apart.
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# Row-major scan order of the 8 neighbours as (dx, dy); ties go to the first.
NEIGHBOUR_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
)

TCD_QUANT = float(np.cos(3.0 * np.pi / 8.0))

# Tolerance on the instance-score comparison so float32 scores equal to the
# threshold are kept.
SCORE_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class NextMap:
    """Per-pixel step ``(dx, dy)`` in ``{-1, 0, 1}``, never leaving the image."""

    dx: NDArray[np.int8]
    dy: NDArray[np.int8]

    def __post_init__(self) -> None:
        dx = np.asarray(self.dx, dtype=np.int8)
        dy = np.asarray(self.dy, dtype=np.int8)
        if dx.shape != dy.shape or dx.ndim != 2:
            raise ValueError("dx and dy must be 2-D arrays of one shape.")
        if np.abs(dx).max(initial=0) > 1 or np.abs(dy).max(initial=0) > 1:
            raise ValueError("Next-step offsets must lie in {-1, 0, 1}.")
        height, width = dx.shape
        rows, cols = np.indices((height, width))
        inside = (
            (cols + dx >= 0) & (cols + dx < width) & (rows + dy >= 0) & (rows + dy < height)
        )
        if not inside.all():
            raise ValueError("Next-step offsets must stay inside the image.")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def shape(self) -> tuple[int, int]:
        return self.dx.shape  # type: ignore[return-value]

    def offset(self, row: int, col: int) -> tuple[int, int]:
        return int(self.dx[row, col]), int(self.dy[row, col])

    def targets(self) -> NDArray[np.int64]:
        """Flat index of each pixel's next pixel."""
        height, width = self.shape
        rows, cols = np.indices((height, width))
        return ((rows + self.dy) * width + (cols + self.dx)).astype(np.int64).ravel()


class Peaks(NamedTuple):
    """Labeled peak components, their count and the border (foot) mask."""

    seeds: InstanceMap
    count: int
    border: NDArray[np.bool_]


class ClimbTrace(NamedTuple):
    """Grouping output together with the final block map."""

    labels: InstanceMap
    blocked: NDArray[np.bool_]


def text_mask(ts: RasterMap | ArrayLike, cfg: GroupConfig) -> NDArray[np.bool_]:
    """Pixels whose text score reaches ``ts_border_min``."""
    return as_plane(ts) >= cfg.ts_border_min


def extract_peaks(
    tcbp: RasterMap | ArrayLike, ts: RasterMap | ArrayLike, cfg: GroupConfig | None = None
) -> Peaks:
    """Threshold TCBP on text into peaks, label them 1..K with 4-connectivity.

    Returns:
        Peaks: ``seeds`` instance map, ``count`` K, and the border mask
        ``TS >= ts_border_min and TCBP <= gamma``.
    """
    cfg = cfg or GroupConfig()
    center = as_plane(tcbp)
    text = text_mask(ts, cfg)
    if center.shape != text.shape:
        raise ValueError(f"TCBP shape {center.shape} differs from TS shape {text.shape}.")
    peak = text & (center > cfg.gamma)
    labels, count = ndimage.label(peak, structure=FOUR_CONNECTED)
    return Peaks(InstanceMap(labels), int(count), text & ~peak)


def instance_scores(seeds: InstanceMap, ts: RasterMap | ArrayLike) -> NDArray[np.float64]:
    """Mean TS per label id; index 0 is background."""
    score = as_plane(ts).ravel()
    labels = seeds.labels.ravel()
    length = seeds.count + 1
    sums = np.bincount(labels, weights=score, minlength=length)
    counts = np.bincount(labels, minlength=length)
    return sums / np.maximum(counts, 1)


def score_instances(
    seeds: InstanceMap, ts: RasterMap | ArrayLike, cfg: GroupConfig | None = None
) -> InstanceMap:
    """Drop peaks whose mean TS is below ``instance_score_min`` and relabel densely."""
    cfg = cfg or GroupConfig()
    if seeds.count == 0:
        return seeds
    means = instance_scores(seeds, ts)
    return _keep_labels(seeds, means >= cfg.instance_score_min - SCORE_TOLERANCE, "low-score")


def filter_peaks(
    seeds: InstanceMap, tcbp: RasterMap | ArrayLike, cfg: GroupConfig | None = None
) -> InstanceMap:
    """Drop small or shallow peaks and relabel densely.

    A peak is kept when it has at least ``min_peak_area`` pixels and its highest
    TCBP reaches ``peak_core_min`` (two-level thresholding). Islands that noise
    lifts just above ``gamma`` beside a real peak fail both tests; their pixels
    are climbed like any other border pixel.
    """
    cfg = cfg or GroupConfig()
    if seeds.count == 0:
        return seeds
    index = np.arange(1, seeds.count + 1)
    areas = np.bincount(seeds.labels.ravel(), minlength=seeds.count + 1)
    highest = np.zeros(seeds.count + 1)
    highest[1:] = ndimage.maximum(as_plane(tcbp), labels=seeds.labels, index=index)
    keep = (areas >= cfg.min_peak_area) & (highest >= cfg.peak_core_min)
    return _keep_labels(seeds, keep, "small or shallow")


def _keep_labels(seeds: InstanceMap, keep: NDArray[np.bool_], reason: str) -> InstanceMap:
    keep = keep.copy()
    keep[0] = False
    remap = np.zeros(keep.size, dtype=np.int32)
    remap[keep] = np.arange(1, int(keep.sum()) + 1, dtype=np.int32)
    dropped = seeds.count - int(keep.sum())
    if dropped:
        logger.debug("Removed %d %s peak(s) of %d", dropped, reason, seeds.count)
    return InstanceMap(remap[seeds.labels])


def next_from_tcbp(tcbp: RasterMap | ArrayLike, text: ArrayLike) -> NextMap:
    """Step every text pixel to its highest in-bounds 8-neighbour.

    The pixel itself is not a candidate; cycles this creates are caught by the
    climb's guards. Non-text pixels get ``(0, 0)``.
    """
    values = as_plane(tcbp)
    mask = np.asarray(text, dtype=bool)
    height, width = values.shape
    padded = np.pad(values, 1, constant_values=-np.inf)
    stack = np.stack(
        [padded[1 + dy : 1 + dy + height, 1 + dx : 1 + dx + width] for dx, dy in NEIGHBOUR_OFFSETS]
    )
    best = np.argmax(stack, axis=0)
    offsets = np.array(NEIGHBOUR_OFFSETS, dtype=np.int8)
    valid = mask & np.isfinite(np.take_along_axis(stack, best[None], axis=0)[0])
    dx = np.where(valid, offsets[best, 0], 0).astype(np.int8)
    dy = np.where(valid, offsets[best, 1], 0).astype(np.int8)
    return NextMap(dx, dy)


def next_from_tcd(u: RasterMap | ArrayLike) -> NextMap:
    """Quantize each direction vector to one of the 8 neighbours or itself.

    A component becomes +1 above ``cos(3 pi / 8)``, -1 below its negative and 0
    otherwise; steps that would leave the image are clamped to 0.
    """
    data = u.data if isinstance(u, RasterMap) else np.asarray(u, dtype=np.float64)
    ux = np.asarray(data[0], dtype=np.float64)
    uy = np.asarray(data[1], dtype=np.float64)
    dx = np.where(ux > TCD_QUANT, 1, np.where(ux < -TCD_QUANT, -1, 0)).astype(np.int8)
    dy = np.where(uy > TCD_QUANT, 1, np.where(uy < -TCD_QUANT, -1, 0)).astype(np.int8)
    height, width = ux.shape
    dx[:, 0][dx[:, 0] < 0] = 0
    dx[:, width - 1][dx[:, width - 1] > 0] = 0
    dy[0, :][dy[0, :] < 0] = 0
    dy[height - 1, :][dy[height - 1, :] > 0] = 0
    return NextMap(dx, dy)


@njit(cache=True, parallel=True)
def _climb_parallel(colors, blocked, nxt, positive, starts, limit):  # type: ignore[no-untyped-def]
    for k in prange(starts.size):
        p = starts[k]
        p_next = nxt[p]
        i = 0
        while True:
            i += 1
            if blocked[p_next] == 1:
                blocked[p] = 1
                break
            if positive[p_next] == 0 or p_next == p or i > limit:
                blocked[p_next] = 1
                blocked[p] = 1
                break
            color = colors[p_next]
            if color != 0:
                colors[p] = color
                break
            p_next = nxt[p_next]


@njit(cache=True)
def _climb_sequential(seeds, nxt, positive, starts, limit):  # type: ignore[no-untyped-def]
    out = seeds.copy()
    for k in range(starts.size):
        p = starts[k]
        q = nxt[p]
        i = 0
        while True:
            i += 1
            if positive[q] == 0 or q == p or i > limit:
                break
            if seeds[q] != 0:
                out[p] = seeds[q]
                break
            q = nxt[q]
    return out


def _climb_inputs(
    seeds: InstanceMap, next_map: NextMap, text: ArrayLike
) -> tuple[NDArray[np.int32], NDArray[np.int64], NDArray[np.uint8], NDArray[np.int64], int]:
    mask = np.asarray(text, dtype=bool)
    if mask.shape != seeds.labels.shape or next_map.shape != seeds.labels.shape:
        raise ValueError("Seeds, next map and text mask must share one shape.")
    flat_seeds = seeds.labels.ravel().copy()
    positive = mask.ravel().astype(np.uint8)
    starts = np.flatnonzero(positive.astype(bool) & (flat_seeds == 0)).astype(np.int64)
    return flat_seeds, next_map.targets(), positive, starts, int(positive.sum())


def climb_parallel(
    seeds: InstanceMap, next_map: NextMap, text: ArrayLike, workers: int | None = None
) -> ClimbTrace:
    """Run the shared-state parallel climb and return labels plus the block map."""
    colors, nxt, positive, starts, limit = _climb_inputs(seeds, next_map, text)
    blocked = np.zeros(colors.size, dtype=np.uint8)
    if starts.size:
        previous = numba.get_num_threads()
        threads = min(workers or previous, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(max(threads, 1))
        try:
            _climb_parallel(colors, blocked, nxt, positive, starts, limit)
        finally:
            numba.set_num_threads(previous)
    shape = seeds.labels.shape
    n_blocked = int(np.count_nonzero(blocked.astype(bool) & (colors == 0) & (positive == 1)))
    if n_blocked:
        logger.debug("%d text pixel(s) ended on blocked routes", n_blocked)
    return ClimbTrace(InstanceMap(colors.reshape(shape)), blocked.reshape(shape).astype(bool))


def group_parallel(
    seeds: InstanceMap, next_map: NextMap, text: ArrayLike, workers: int | None = None
) -> InstanceMap:
    """Color every non-peak text pixel with the peak its pointer chain reaches.

    A walk stops on a colored pixel and adopts its color, or is blocked (label 0)
    when it leaves the text mask, returns to its start, exceeds N steps (N is the
    number of text pixels) or steps onto a blocked pixel. Walkers read colors
    that other walkers have already written. The result equals
    :func:`group_sequential` for any worker count.

    Args:
        seeds: Peak labels.
        next_map: Per-pixel next step.
        text: Boolean text mask.
        workers: numba threads; defaults to numba's current setting.

    Returns:
        InstanceMap: Final instance ids.
    """
    return climb_parallel(seeds, next_map, text, workers).labels


def group_sequential(seeds: InstanceMap, next_map: NextMap, text: ArrayLike) -> InstanceMap:
    """Single-walker reference climb: each pixel walks alone until it meets a seed."""
    flat_seeds, nxt, positive, starts, limit = _climb_inputs(seeds, next_map, text)
    out = _climb_sequential(flat_seeds, nxt, positive, starts, limit)
    return InstanceMap(np.asarray(out).reshape(seeds.labels.shape))


def group_baseline(ts: RasterMap | ArrayLike, cfg: GroupConfig | None = None) -> InstanceMap:
    """Segmentation baseline: 4-connected components of the text mask, no climbing."""
    cfg = cfg or GroupConfig()
    labels, _ = ndimage.label(text_mask(ts, cfg), structure=FOUR_CONNECTED)
    return InstanceMap(labels)
