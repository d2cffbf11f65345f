from .base import (
    CONSTRUCTION,
    GENERATION,
    ChatRequest,
    EmbeddingVector,
    PhaseTotals,
    Provider,
    UsageRecord,
    UsageTracker,
)
from .http import HttpProvider
from .mock import MockProvider

__all__ = [
    "CONSTRUCTION",
    "GENERATION",
    "ChatRequest",
    "EmbeddingVector",
    "PhaseTotals",
    "Provider",
    "UsageRecord",
    "UsageTracker",
    "HttpProvider",
    "MockProvider",
]
