"""Boundary-aware query Transformer for temporal action segmentation."""

from .data import FrameSequence, derive_ground_truth, synthesize_dataset
from .model import BaFormer, ModelConfig
from .training import TrainConfig, infer, train

__all__ = [
    "BaFormer",
    "FrameSequence",
    "ModelConfig",
    "TrainConfig",
    "derive_ground_truth",
    "infer",
    "synthesize_dataset",
    "train",
]
