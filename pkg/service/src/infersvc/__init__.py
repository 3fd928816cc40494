"""HTTP inference service: zero-shot detection and box-prompted segmentation."""

__version__ = "0.1.0"
