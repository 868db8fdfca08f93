"""Cached scene building shared by the inspector pages."""

from dataclasses import dataclass

import numpy as np
import streamlit as st

from text_mountain.maps import MapBundle
from text_mountain.services.synth import (
    NOISE_STREAM,
    Scene,
    SynthConfig,
    SyntheticSceneGenerator,
    add_noise,
)


@dataclass(frozen=True)
class InspectorSettings:
    """Sidebar selections."""

    seed: int = 0
    size: int = 384
    max_texts: int = 5
    curved_ratio: float = 0.0
    noise: float = 0.0
    angle_noise: float = 0.0

    def generator(self) -> SyntheticSceneGenerator:
        config = SynthConfig(
            width=self.size,
            height=self.size,
            max_texts=self.max_texts,
            curved_ratio=self.curved_ratio,
        )
        return SyntheticSceneGenerator(config, seed=self.seed)


@st.cache_resource
def load_scene(settings: InspectorSettings, index: int = 0) -> Scene:
    """Build and cache one synthetic scene."""
    return settings.generator().scene(index)


def predicted_maps(settings: InspectorSettings, scene: Scene, index: int = 0) -> MapBundle:
    """The scene's exact maps, or a noisy copy when noise is selected."""
    maps = scene.labels.as_bundle()
    if settings.noise == 0 and settings.angle_noise == 0:
        return maps
    rng: np.random.Generator = settings.generator().rng(index, NOISE_STREAM)
    return add_noise(maps, settings.noise, settings.angle_noise, rng)
