"""Real-time conversation support engine.

Deterministic, replayable session service with incremental dialogue
summaries, timed next-phrase suggestions and an off-topic alert level, backed
by a pluggable language-model boundary.
"""

__version__ = "0.1.0"

from .config import EngineConfig, MockLatencies
from .types import (
    BackendRequest,
    BackendResponse,
    Channel,
    FeatureConfig,
    PanelId,
    SessionPhase,
    Speaker,
    Utterance,
)

__all__ = [
    "EngineConfig",
    "MockLatencies",
    "BackendRequest",
    "BackendResponse",
    "Channel",
    "FeatureConfig",
    "PanelId",
    "SessionPhase",
    "Speaker",
    "Utterance",
    "__version__",
]
