"""Shared domain types and error hierarchy.

Everything here is immutable and JSON-friendly; the reducer, channels and
service all build on these.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Speaker(str, enum.Enum):
    SELF = "self"
    PARTNER = "partner"


class SessionPhase(str, enum.Enum):
    FUNCTION_SELECTION = "function_selection"
    CONVERSATION = "conversation"
    FEEDBACK = "feedback"


class PanelId(str, enum.Enum):
    SELF_SUMMARY = "self_summary"
    OTHER_SUMMARY = "other_summary"
    SUGGESTIONS = "suggestions"


class Channel(str, enum.Enum):
    """Backend request routing key. The two summary channels are distinct."""

    SELF_SUMMARY = "self_summary"
    OTHER_SUMMARY = "other_summary"
    SUGGESTION = "suggestion"
    OFFTOPIC = "offtopic"


@dataclass(frozen=True)
class FeatureConfig:
    """The five toggles chosen in the selection phase; frozen on confirm."""

    self_summary: bool = True
    other_summary: bool = True
    word_suggestions: bool = True
    offtopic_detection: bool = True
    popup_animation: bool = True

    def enabled_panels(self) -> tuple[PanelId, ...]:
        panels = []
        if self.self_summary:
            panels.append(PanelId.SELF_SUMMARY)
        if self.other_summary:
            panels.append(PanelId.OTHER_SUMMARY)
        if self.word_suggestions:
            panels.append(PanelId.SUGGESTIONS)
        return tuple(panels)

    def to_dict(self) -> dict:
        return {
            "self_summary": self.self_summary,
            "other_summary": self.other_summary,
            "word_suggestions": self.word_suggestions,
            "offtopic_detection": self.offtopic_detection,
            "popup_animation": self.popup_animation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        known = {f: bool(d[f]) for f in cls.__dataclass_fields__ if f in d}
        return cls(**known)


class PanelVisibility(str, enum.Enum):
    HIDDEN = "hidden"
    VISIBLE = "visible"
    FOCUSED = "focused"


@dataclass(frozen=True)
class PanelLifecycle:
    """Hidden, or Visible/Focused since a given session-clock instant.

    ``since_ms`` is the activation time; focusing does not restart the
    fade timer.
    """

    state: PanelVisibility = PanelVisibility.HIDDEN
    since_ms: int = 0

    @property
    def is_visible(self) -> bool:
        return self.state is not PanelVisibility.HIDDEN


@dataclass(frozen=True)
class Utterance:
    """One timestamped, speaker-tagged speech segment."""

    id: int
    t_start_ms: int
    t_end_ms: int
    speaker: Speaker
    text: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "t_start_ms": self.t_start_ms,
            "t_end_ms": self.t_end_ms,
            "speaker": self.speaker.value,
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Utterance":
        return cls(
            id=int(d["id"]),
            t_start_ms=int(d["t_start_ms"]),
            t_end_ms=int(d["t_end_ms"]),
            speaker=Speaker(d["speaker"]),
            text=str(d["text"]),
        )


@dataclass(frozen=True)
class BackendRequest:
    """One correlated exchange with the language-model backend (outbound)."""

    request_id: int
    channel: Channel
    prompt: str
    issued_at_ms: int


@dataclass(frozen=True)
class BackendResponse:
    """Inbound completion; ``error`` set means no usable text arrived."""

    request_id: int
    text: str = ""
    latency_ms: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class ConvoaidError(Exception):
    """Base class for engine errors."""


class IllegalPhase(ConvoaidError):
    """Operation not allowed in the session's current phase."""


class OrderViolation(ConvoaidError):
    """Event sequence number or timestamp out of order."""


class NotVisible(ConvoaidError):
    """Focus requested on a panel that is not visible."""


class ParseError(ConvoaidError):
    """Malformed transcript or protocol input; carries a location."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class ValidationError:
    """Channel output rejected; keeps what was parsed for the clamp path."""

    reason: str  # "too_few" | "too_many" | "term_too_long" | "too_long" | "sentence" | "empty"
    terms: tuple[str, ...] = field(default_factory=tuple)
