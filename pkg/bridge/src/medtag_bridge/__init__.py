"""Probability exporter bridging external token-classification models
into the medtag-probs-v1 file contract."""

from .backends import (
    CANONICAL_LABELS,
    DummyUniformModel,
    StubLexiconModel,
    TransformersModel,
    load_backend,
)
from .errors import BridgeError, DataError, ModelLoadError, SequenceOverflowError
from .exporter import BridgeConfig, export_probs

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "CANONICAL_LABELS",
    "DataError",
    "DummyUniformModel",
    "ModelLoadError",
    "SequenceOverflowError",
    "StubLexiconModel",
    "TransformersModel",
    "export_probs",
    "load_backend",
]
