"""Streamlit inspector for synthetic scenes, grouping and evaluation."""

import streamlit as st

from text_mountain.config import default_seed
from text_mountain.pages import detection, evaluation, labels
from text_mountain.pages.common import InspectorSettings

# Load environment variables for local development
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


st.set_page_config(
    page_title="⛰️ Text Mountain",
    page_icon="⛰️",
    layout="wide",
    initial_sidebar_state="expanded",
)


def sidebar_settings() -> InspectorSettings:
    """Scene controls shared by every page.

    Returns:
        InspectorSettings: The values currently selected in the sidebar.
    """
    st.sidebar.subheader("Scene")
    seed = st.sidebar.number_input("Seed", min_value=0, value=default_seed(), step=1)
    size = st.sidebar.select_slider("Size", options=[128, 256, 384, 512, 640], value=384)
    max_texts = st.sidebar.slider("Max texts", 1, 12, 5)
    curved_ratio = st.sidebar.slider("Curved ratio", 0.0, 1.0, 0.0, 0.1)
    st.sidebar.subheader("Noise")
    noise = st.sidebar.slider("TS / TCBP sigma", 0.0, 0.3, 0.0, 0.01)
    angle_noise = st.sidebar.slider("TCD angle sigma (deg)", 0.0, 45.0, 0.0, 1.0)
    return InspectorSettings(
        seed=int(seed),
        size=int(size),
        max_texts=int(max_texts),
        curved_ratio=float(curved_ratio),
        noise=float(noise),
        angle_noise=float(angle_noise),
    )


def main() -> None:
    """Main application entry point and page routing."""
    st.sidebar.title("⛰️ Text Mountain")
    page = st.sidebar.radio("Navigation", ["🗺️ Label Maps", "🧗 Grouping", "📊 Evaluation"])
    st.sidebar.divider()
    settings = sidebar_settings()

    if page == "🗺️ Label Maps":
        labels.show(settings)
    elif page == "🧗 Grouping":
        detection.show(settings)
    elif page == "📊 Evaluation":
        evaluation.show(settings)


if __name__ == "__main__":
    main()
