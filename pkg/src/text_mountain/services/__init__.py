"""File formats, rendering and synthetic data for text_mountain."""
