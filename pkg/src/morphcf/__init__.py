"""Counterfactual explanations for segmented grayscale image classifiers.

Transplants user-selected morphological segments between a target and
source volume, re-classifies the recombined images and summarizes which
segments flip predictions.
"""

from .core import (
    SegmentMap,
    SegmentSchema,
    SegmentSelection,
    SubjectRecord,
    Volume,
    combinations,
)
from .morphmix import RecombinationSpec, RecombinedImage, centroid, recombine

__all__ = [
    "Volume",
    "SegmentMap",
    "SegmentSchema",
    "SegmentSelection",
    "SubjectRecord",
    "combinations",
    "centroid",
    "recombine",
    "RecombinationSpec",
    "RecombinedImage",
]

__version__ = "0.1.0"
