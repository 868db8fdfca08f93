"""Run-time configuration: grouping thresholds, loss weights and environment lookup."""

import logging
import os
from dataclasses import dataclass, field
from enum import Enum

from text_mountain.errors import ConfigError

logger = logging.getLogger(__name__)

try:
    import streamlit as st

    _STREAMLIT_AVAILABLE = True
except ImportError:
    _STREAMLIT_AVAILABLE = False


class GraphSource(str, Enum):
    """Which predicted map drives the next-step graph."""

    TCBP = "tcbp"
    TCD = "tcd"
    # Plain connected components of TS, no climbing (segmentation baseline).
    TS = "ts"


class DetectMode(str, Enum):
    """Shape of the output polygons."""

    QUAD = "quad"
    CURVED = "curved"


@dataclass(frozen=True)
class GroupConfig:
    """Thresholds used by peak extraction and grouping.

    Attributes:
        gamma: TCBP value above which a text pixel is a mountain peak.
        instance_score_min: Minimum mean TS over a peak for the instance to survive.
        ts_border_min: TS value at or above which a pixel counts as text.
        graph_source: Map used to build the next-step graph.
        min_peak_area: Peaks with fewer pixels are not used as seeds.
        peak_core_min: TCBP value a peak must reach somewhere to be used as a seed.
    """

    gamma: float = 0.6
    instance_score_min: float = 0.7
    ts_border_min: float = 0.6
    graph_source: GraphSource = GraphSource.TCBP
    min_peak_area: int = 10
    peak_core_min: float = 0.8

    def __post_init__(self) -> None:
        for name in ("gamma", "instance_score_min", "ts_border_min"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}.")
        if self.min_peak_area < 1:
            raise ConfigError(f"min_peak_area must be at least 1, got {self.min_peak_area}.")
        if not 0.0 <= self.peak_core_min <= 1.0:
            raise ConfigError(f"peak_core_min must lie in [0, 1], got {self.peak_core_min}.")
        if not isinstance(self.graph_source, GraphSource):
            object.__setattr__(self, "graph_source", GraphSource(self.graph_source))


@dataclass(frozen=True)
class LossWeights:
    """Balancing factors and sampling constants of the training objective.

    Attributes:
        lambda_tcbp: Weight of the TCBP term in the total loss.
        lambda_tcd: Weight of the TCD term in the total loss.
        neg_ratio: Negatives kept per positive by hard negative mining.
        fallback_negatives: Negatives kept when an image has no positive pixel.
        eps: Probability clamp applied before taking logarithms.
    """

    lambda_tcbp: float = 5.0
    lambda_tcd: float = 2.5
    neg_ratio: int = 3
    fallback_negatives: int = 256
    eps: float = 1e-7

    def __post_init__(self) -> None:
        if self.lambda_tcbp < 0 or self.lambda_tcd < 0:
            raise ConfigError("Loss weights must be non-negative.")
        if self.neg_ratio < 0 or self.fallback_negatives < 0:
            raise ConfigError("Negative sample counts must be non-negative.")
        if not 0.0 < self.eps < 0.5:
            raise ConfigError(f"eps must lie in (0, 0.5), got {self.eps}.")


SECRETS_TABLE = "text_mountain"


def _get_config_value(key: str, secret: str | None = None) -> str | None:
    """Look a setting up in the Streamlit secrets, then in the environment.

    Args:
        key: Environment variable, e.g. ``TM_WORKERS``.
        secret: Name inside the ``[text_mountain]`` secrets table; None skips secrets.

    Returns:
        str | None: The first value found, as a string.
    """
    if _STREAMLIT_AVAILABLE and secret:
        try:
            return str(st.secrets[SECRETS_TABLE][secret])
        except (KeyError, AttributeError, FileNotFoundError):
            logger.debug("No %s.%s secret, falling back to %s", SECRETS_TABLE, secret, key)
    return os.getenv(key)


def default_workers() -> int:
    """Return the worker count from ``TM_WORKERS`` or the machine's CPU count.

    Raises:
        ConfigError: If ``TM_WORKERS`` is set but is not a positive integer.
    """
    raw = _get_config_value("TM_WORKERS", "workers")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        workers = int(raw)
    except ValueError as e:
        raise ConfigError(f"TM_WORKERS must be a positive integer, got {raw!r}.") from e
    if workers < 1:
        raise ConfigError(f"TM_WORKERS must be a positive integer, got {raw!r}.")
    return workers


def default_seed() -> int:
    """Return the synthetic-scene seed from ``TM_SEED`` (0 when unset)."""
    raw = _get_config_value("TM_SEED", "seed")
    try:
        return int(raw) if raw else 0
    except ValueError as e:
        raise ConfigError(f"TM_SEED must be an integer, got {raw!r}.") from e


def default_log_level() -> str:
    """Return the log level name from ``TM_LOG_LEVEL`` (WARNING when unset)."""
    return (_get_config_value("TM_LOG_LEVEL", "log_level") or "WARNING").upper()


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; defaults reproduce the published settings."""

    group: GroupConfig = field(default_factory=GroupConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    mode: DetectMode = DetectMode.QUAD
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}.")
        if not isinstance(self.mode, DetectMode):
            object.__setattr__(self, "mode", DetectMode(self.mode))

    @classmethod
    def from_env(cls) -> "RunConfig":
        """Build a RunConfig whose worker count and seed come from the environment."""
        return cls(workers=default_workers(), seed=default_seed())
