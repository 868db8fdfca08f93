"""Evaluation page: precision, recall and F-measure over several scenes."""

import plotly.express as px
import streamlit as st

from text_mountain.config import DetectMode, GroupConfig
from text_mountain.detect import detect_pipeline
from text_mountain.evaluation import EvalResult, evaluate_dataset
from text_mountain.pages.common import InspectorSettings, load_scene, predicted_maps


@st.cache_data
def per_image_results(settings: InspectorSettings, count: int, iou_min: float) -> EvalResult:
    """Detect and evaluate the first ``count`` scenes of the current seed."""
    samples = {}
    for index in range(count):
        scene = load_scene(settings, index)
        maps = predicted_maps(settings, scene, index)
        dets = detect_pipeline(maps, GroupConfig(), DetectMode.QUAD, workers=1)
        samples[scene.name] = (dets, scene.polygons)
    return evaluate_dataset(samples, iou_min=iou_min)


def show(settings: InspectorSettings) -> None:
    """Display dataset-level metrics and a per-scene table.

    Args:
        settings: Sidebar selections.
    """
    st.title("📊 Evaluation")

    col1, col2 = st.columns(2)
    with col1:
        count = st.slider("Scenes", 1, 50, 10)
    with col2:
        iou_min = st.slider("IoU threshold", 0.3, 0.9, 0.5, 0.05)

    result = per_image_results(settings, count, iou_min)
    table = result.per_image

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Precision", f"{result.precision:.3f}")
    with col2:
        st.metric("Recall", f"{result.recall:.3f}")
    with col3:
        st.metric("F-measure", f"{result.f_measure:.3f}")

    fig = px.bar(table, x="image", y="f_measure", title="F-measure per scene", range_y=[0, 1])
    st.plotly_chart(fig, use_container_width=True)
    st.dataframe(table, use_container_width=True, hide_index=True)
