"""Reliability-weighted multimodal fusion with a label-quality annotation pipeline."""

from .estimator import ReliabilityFusionClassifier
from .labels import BIG_FIVE, EMOTIONS, MODALITIES, Modality
from .model import FusionConfig, ReliabilityFusionModel
from .training import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "ReliabilityFusionClassifier",
    "ReliabilityFusionModel",
    "FusionConfig",
    "TrainConfig",
    "Modality",
    "MODALITIES",
    "EMOTIONS",
    "BIG_FIVE",
]
