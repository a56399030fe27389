"""Flood risk predisposition labelling, class-weighted random forests and exact TreeSHAP."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .model import FEATURES, DataError, FeatureTable, LabeledDataset

__all__ = ["BACKEND", "FEATURES", "DataError", "FeatureTable", "LabeledDataset", "__version__"]
