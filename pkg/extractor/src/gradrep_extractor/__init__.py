"""Offline CNN feature extraction into the gradrep tensor/manifest format."""

from .backbones import BACKBONES, get_backbone
from .extract import ExtractConfig, FeatureExtractor, extract

__version__ = "0.1.0"

__all__ = ["BACKBONES", "ExtractConfig", "FeatureExtractor", "extract", "get_backbone"]
