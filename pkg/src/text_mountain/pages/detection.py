"""Grouping page: interactive thresholds, instance map and detections."""

import pandas as pd
import streamlit as st

from text_mountain.config import DetectMode, GraphSource, GroupConfig
from text_mountain.detect import detect_instances, instance_to_polygons
from text_mountain.evaluation import match_and_score
from text_mountain.pages.common import InspectorSettings, load_scene, predicted_maps
from text_mountain.services.render import render_image


def show(settings: InspectorSettings) -> None:
    """Run detection on the selected scene with the chosen thresholds.

    Args:
        settings: Sidebar selections.
    """
    st.title("🧗 Grouping")

    col1, col2, col3 = st.columns(3)
    with col1:
        gamma = st.slider("Peak threshold (gamma)", 0.05, 0.95, 0.6, 0.05)
    with col2:
        instance_min = st.slider("Instance score", 0.05, 0.95, 0.7, 0.05)
    with col3:
        ts_min = st.slider("Text threshold", 0.05, 0.95, 0.6, 0.05)

    col1, col2 = st.columns(2)
    with col1:
        min_peak_area = st.slider("Min peak area (px)", 1, 50, 10)
    with col2:
        peak_core = st.slider("Peak core TCBP", 0.0, 1.0, 0.8, 0.05)

    col1, col2 = st.columns(2)
    with col1:
        source = st.radio("Graph", [s.value for s in GraphSource], horizontal=True)
    with col2:
        mode = st.radio("Polygons", [m.value for m in DetectMode], horizontal=True)

    cfg = GroupConfig(
        gamma=gamma,
        instance_score_min=instance_min,
        ts_border_min=ts_min,
        graph_source=GraphSource(source),
        min_peak_area=min_peak_area,
        peak_core_min=peak_core,
    )
    scene = load_scene(settings)
    maps = predicted_maps(settings, scene)
    instances = detect_instances(maps, cfg)
    detections = instance_to_polygons(instances, maps.ts, DetectMode(mode))

    left, right = st.columns(2)
    with left:
        st.image(render_image(maps.ts), caption="Input TS", use_container_width=True)
    with right:
        st.image(render_image(instances), caption=f"{instances.count} instance(s)", use_container_width=True)

    result = match_and_score(detections, scene.polygons, image=scene.name)
    st.subheader("Detections")
    st.caption(result.summary())
    if detections:
        st.dataframe(
            pd.DataFrame(
                {
                    "score": [d.score for d in detections],
                    "vertices": [len(d.polygon) for d in detections],
                    "area": [round(d.area, 1) for d in detections],
                }
            ),
            use_container_width=True,
        )
    else:
        st.info("No text instances survived the thresholds.")
