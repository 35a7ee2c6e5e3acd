"""Interactive click-driven image and video segmentation."""

__version__ = "0.1.0"
