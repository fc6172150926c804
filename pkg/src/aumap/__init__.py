"""Approximate UMAP: real-time out-of-sample projection onto a fixed UMAP embedding."""

from .core import (
    AumapError,
    CountMismatch,
    DegenerateOracle,
    DimensionMismatch,
    EmptyEmbedding,
    EmptyInput,
    KTooLarge,
    NonFiniteValue,
    ParseError,
    ProjectorConfig,
    ReferenceEmbedding,
    UnsupportedDimensionality,
    validate_embedding,
)
from .knn import KnnIndex, NeighborSet, build_index, query
from .projector import Projector, fit, project_batch, project_point

__version__ = "0.1.0"
