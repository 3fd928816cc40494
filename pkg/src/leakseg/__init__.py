"""Zero-shot infrared gas-leak video segmentation pipeline and benchmark harness."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .core import BBox, BinaryMask, Frame, Manifest, ScoredBox, VideoClip

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BinaryMask",
    "Frame",
    "KERNEL_BACKEND",
    "Manifest",
    "ScoredBox",
    "VideoClip",
    "__version__",
]
