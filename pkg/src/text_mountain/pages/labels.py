"""Label map page: TS, TCBP and TCD of one synthetic scene."""

import numpy as np
import plotly.express as px
import streamlit as st

from text_mountain.labelgen import binary_center_map
from text_mountain.pages.common import InspectorSettings, load_scene
from text_mountain.services.render import render_image


def show(settings: InspectorSettings) -> None:
    """Display the ground-truth maps of the selected scene.

    Args:
        settings: Sidebar selections.
    """
    st.title("🗺️ Label Maps")

    scene = load_scene(settings)
    labels = scene.labels

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Texts", len(scene.polygons))
    with col2:
        st.metric("Text pixels", int(labels.ts.plane(0).sum()))
    with col3:
        st.metric("Ignored pixels", int(labels.ignore.sum()))

    tab1, tab2, tab3, tab4 = st.tabs(["TS", "TCBP", "TCD", "Binary center"])

    with tab1:
        st.image(render_image(labels.ts), caption="Text score", use_container_width=True)

    with tab2:
        fig = px.imshow(
            labels.tcbp.plane(0),
            color_continuous_scale="gray",
            zmin=0.0,
            zmax=1.0,
            title="Text center-border probability",
        )
        st.plotly_chart(fig, use_container_width=True)

    with tab3:
        st.image(render_image(labels.tcd), caption="Center direction (hue = angle)", use_container_width=True)
        angles = np.degrees(np.arctan2(labels.tcd.plane(1), labels.tcd.plane(0)))
        text = labels.ts.plane(0) > 0.5
        if text.any():
            fig = px.histogram(x=angles[text], nbins=36, title="TCD angle distribution (deg)")
            st.plotly_chart(fig, use_container_width=True)

    with tab4:
        gamma = st.slider("gamma", 0.05, 0.95, 0.6, 0.05, key="labels_gamma")
        st.image(
            render_image(binary_center_map(labels.tcbp, labels.ts, gamma)),
            caption=f"TS * (TCBP > {gamma:.2f})",
            use_container_width=True,
        )
