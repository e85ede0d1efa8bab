"""Pydantic request/response models for the wire protocol and REST surface.

Client->server message types: hello, set_config, confirm, utterance,
gaze_trigger, gaze_focus, gaze_unfocus, trigger_poke, confetti_tap, end.
Server->client: session_created, phase_changed, panels_state, summary_update,
suggestion_update, trigger_state, feedback, error. Broadcast messages carry a
strictly increasing per-session seq; error replies do not.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator

MAX_MESSAGE_BYTES = 64 * 1024
MAX_UTTERANCE_CHARS = 8 * 1024


class HelloPayload(BaseModel):
    topic: str = ""
    session: Optional[str] = None  # reattach to an existing session


class SetConfigPayload(BaseModel):
    config: dict[str, bool] = Field(default_factory=dict)


class UtterancePayload(BaseModel):
    speaker: Literal["self", "partner"]
    text: str

    @field_validator("text")
    @classmethod
    def _nonempty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("text must be non-empty after trimming")
        if len(v) > MAX_UTTERANCE_CHARS:
            raise ValueError(f"text exceeds {MAX_UTTERANCE_CHARS} characters")
        return v


class GazeFocusPayload(BaseModel):
    panel: Literal["self_summary", "other_summary", "suggestions"]


class ClientMessage(BaseModel):
    type: str
    payload: dict[str, Any] = Field(default_factory=dict)


class ServerMessage(BaseModel):
    type: str
    session: str
    payload: dict[str, Any] = Field(default_factory=dict)
    seq: Optional[int] = None  # set on broadcast state events only


# --- REST ------------------------------------------------------------------


class ReplayRequest(BaseModel):
    transcript: str  # newline-delimited transcript text
    seed: int = 0
    speed: float = 0.0
    config: Optional[dict[str, Any]] = None
    pause_threshold_ms: int = 2000


class ReplayResponse(BaseModel):
    events_ndjson: str
    report: dict[str, Any]
    feedback: dict[str, Any]


class ReportRequest(BaseModel):
    events_ndjson: str
    pause_threshold_ms: int = 2000
    config: Optional[dict[str, Any]] = None


class ReportResponse(BaseModel):
    report: dict[str, Any]


class SnapshotResponse(BaseModel):
    session: str
    seq: int
    snapshot: dict[str, Any]


def schema_catalog() -> dict[str, Any]:
    """JSON Schemas for every protocol and REST message, by name."""
    models = {
        "client_message": ClientMessage,
        "server_message": ServerMessage,
        "hello_payload": HelloPayload,
        "set_config_payload": SetConfigPayload,
        "utterance_payload": UtterancePayload,
        "gaze_focus_payload": GazeFocusPayload,
        "replay_request": ReplayRequest,
        "replay_response": ReplayResponse,
        "report_request": ReportRequest,
        "report_response": ReportResponse,
        "snapshot_response": SnapshotResponse,
    }
    return {name: model.model_json_schema() for name, model in models.items()}
