"""Session state machine.

(state, event) -> (new_state, effects)

Rules:
- Pure and deterministic: no IO, no wall clocks, no randomness.
- Every mutation flows through apply_event so a session replays bit-for-bit.
- Effects describe side work (backend requests, protocol broadcasts); the
  runtime executes them and feeds results back in as ordered events.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Union

from . import offtopic as offtopic_mod
from . import suggest as suggest_mod
from . import summarize as summarize_mod
from .config import EngineConfig
from .offtopic import OffTopicState, level_to_color
from .suggest import SuggestionState
from .summarize import SummaryState
from .types import (
    BackendRequest,
    BackendResponse,
    Channel,
    FeatureConfig,
    IllegalPhase,
    NotVisible,
    OrderViolation,
    PanelId,
    PanelLifecycle,
    PanelVisibility,
    SessionPhase,
    Speaker,
    Utterance,
)


class EventKind(str, enum.Enum):
    CONFIRM_FUNCTIONS = "confirm_functions"
    UTTERANCE_ARRIVED = "utterance_arrived"
    GAZE_TRIGGER = "gaze_trigger"
    GAZE_FOCUS = "gaze_focus"
    GAZE_UNFOCUS = "gaze_unfocus"
    TICK = "tick"
    BACKEND_ARRIVED = "backend_arrived"
    TRIGGER_POKED = "trigger_poked"
    CONFETTI_TAP = "confetti_tap"
    END_SESSION = "end_session"


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    at_ms: int
    kind: EventKind
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RequestMeta:
    """Routing/bookkeeping for an in-flight backend request."""

    channel: Channel
    utterance_id: int | None = None
    attempt: int = 1


@dataclass(frozen=True)
class IssueRequest:
    request: BackendRequest
    meta: RequestMeta


@dataclass(frozen=True)
class CancelRequest:
    request_id: int


@dataclass(frozen=True)
class Emit:
    """A protocol event to broadcast to connected clients."""

    type: str
    payload: dict


Effect = Union[IssueRequest, CancelRequest, Emit]

_ALL_PANELS = (PanelId.SELF_SUMMARY, PanelId.OTHER_SUMMARY, PanelId.SUGGESTIONS)


def _hidden_panels() -> dict[PanelId, PanelLifecycle]:
    return {p: PanelLifecycle() for p in _ALL_PANELS}


@dataclass(frozen=True)
class SessionState:
    phase: SessionPhase = SessionPhase.FUNCTION_SELECTION
    config: FeatureConfig = field(default_factory=FeatureConfig)
    clock_ms: int = 0
    last_seq: int = 0
    started_at_ms: int = 0
    ended_at_ms: int | None = None
    panels: dict[PanelId, PanelLifecycle] = field(default_factory=_hidden_panels)
    trigger_active: bool = False
    assist_count: int = 0
    confetti_bursts: int = 0
    history: tuple[Utterance, ...] = ()
    next_request_id: int = 1
    pending_meta: dict[int, RequestMeta] = field(default_factory=dict)
    summary_self: SummaryState = field(
        default_factory=lambda: SummaryState(speaker=Speaker.SELF)
    )
    summary_other: SummaryState = field(
        default_factory=lambda: SummaryState(speaker=Speaker.PARTNER)
    )
    suggestion: SuggestionState = field(default_factory=SuggestionState)
    offtopic: OffTopicState = field(default_factory=OffTopicState)

    def utterance_by_id(self) -> dict[int, Utterance]:
        return {u.id: u for u in self.history}


def initial_state() -> SessionState:
    return SessionState()


# ---------------------------------------------------------------------------
# Presentation views shared by broadcasts and snapshots
# ---------------------------------------------------------------------------


def panels_view(state: SessionState, cfg: EngineConfig) -> dict:
    focused = any(
        life.state is PanelVisibility.FOCUSED for life in state.panels.values()
    )
    panels = {}
    for panel in _ALL_PANELS:
        life = state.panels[panel]
        dimmed = focused and life.state is PanelVisibility.VISIBLE
        popup = life.state is PanelVisibility.FOCUSED and state.config.popup_animation
        if life.state is PanelVisibility.HIDDEN:
            opacity = 0.0
        elif dimmed:
            opacity = cfg.dim_opacity
        else:
            opacity = 1.0
        entry = {
            "state": life.state.value,
            "since_ms": life.since_ms if life.is_visible else 0,
            "dimmed": dimmed,
            "opacity": opacity,
        }
        if popup:
            entry["popup"] = True
        panels[panel.value] = entry
    return {
        "panels": panels,
        "trigger_active": state.trigger_active,
        "assist_count": state.assist_count,
    }


def trigger_view(state: SessionState, cfg: EngineConfig) -> dict:
    level = round(state.offtopic.level(cfg.offtopic_ramp_k), 6)
    return {
        "level": level,
        "color": list(level_to_color(level)),
        "active": state.trigger_active,
    }


def snapshot_view(state: SessionState, cfg: EngineConfig) -> dict:
    """The full client-facing view; broadcast events are deltas of this."""
    return {
        "phase": state.phase.value,
        "config": state.config.to_dict(),
        **panels_view(state, cfg),
        "summaries": {
            "self": {
                "keywords": list(state.summary_self.keywords),
                "version": state.summary_self.version,
            },
            "other": {
                "keywords": list(state.summary_other.keywords),
                "version": state.summary_other.version,
            },
        },
        "suggestion": {"words": list(state.suggestion.words)},
        "trigger": trigger_view(state, cfg),
        "confetti_bursts": state.confetti_bursts,
    }


def _emit_panels(state: SessionState, cfg: EngineConfig) -> Emit:
    return Emit("panels_state", panels_view(state, cfg))


def _emit_trigger(state: SessionState, cfg: EngineConfig) -> Emit:
    return Emit("trigger_state", trigger_view(state, cfg))


# ---------------------------------------------------------------------------
# Phase operations
# ---------------------------------------------------------------------------


def confirm_functions(
    state: SessionState, config: FeatureConfig, at_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    if state.phase is not SessionPhase.FUNCTION_SELECTION:
        raise IllegalPhase(f"confirm_functions in phase {state.phase.value}")
    state = replace(
        state,
        phase=SessionPhase.CONVERSATION,
        config=config,
        panels=_hidden_panels(),
        trigger_active=False,
        assist_count=0,
        started_at_ms=at_ms,
        suggestion=replace(state.suggestion, next_due_ms=at_ms + cfg.suggestion_cadence_ms),
    )
    effects = (
        Emit("phase_changed", {"phase": state.phase.value, "config": config.to_dict()}),
        _emit_panels(state, cfg),
        _emit_trigger(state, cfg),
    )
    return state, effects


def trigger_gaze(
    state: SessionState, at_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    """Global toggle: open all enabled panels, or dismiss whatever is up.

    Deliberately global even while a panel is focused; re-gazing dismisses
    everything rather than merely unfocusing.
    """
    if state.phase is not SessionPhase.CONVERSATION:
        return state, ()
    any_visible = any(life.is_visible for life in state.panels.values())
    if any_visible:
        state = replace(state, panels=_hidden_panels(), trigger_active=False)
        return state, (_emit_panels(state, cfg),)
    eligible = state.config.enabled_panels()
    if not eligible:
        return state, ()
    panels = dict(state.panels)
    for panel in eligible:
        panels[panel] = PanelLifecycle(PanelVisibility.VISIBLE, at_ms)
    state = replace(
        state,
        panels=panels,
        trigger_active=True,
        assist_count=state.assist_count + 1,
    )
    return state, (_emit_panels(state, cfg),)


def focus_panel(
    state: SessionState, panel: PanelId, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    life = state.panels[panel]
    if life.state is PanelVisibility.HIDDEN:
        raise NotVisible(f"panel {panel.value} is not visible")
    if life.state is PanelVisibility.FOCUSED:
        return state, ()
    panels = dict(state.panels)
    for pid, other in panels.items():
        if other.state is PanelVisibility.FOCUSED:
            panels[pid] = replace(other, state=PanelVisibility.VISIBLE)
    panels[panel] = replace(life, state=PanelVisibility.FOCUSED)
    state = replace(state, panels=panels)
    return state, (_emit_panels(state, cfg),)


def unfocus_panels(
    state: SessionState, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    if not any(l.state is PanelVisibility.FOCUSED for l in state.panels.values()):
        return state, ()
    panels = {
        pid: replace(l, state=PanelVisibility.VISIBLE)
        if l.state is PanelVisibility.FOCUSED
        else l
        for pid, l in state.panels.items()
    }
    state = replace(state, panels=panels)
    return state, (_emit_panels(state, cfg),)


def tick(
    state: SessionState, now_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    """Fade out expired panels and drive the suggestion scheduler."""
    effects: list[Effect] = []
    changed = False
    panels = dict(state.panels)
    for pid, life in panels.items():
        if life.is_visible and now_ms - life.since_ms >= cfg.panel_fade_ms:
            panels[pid] = PanelLifecycle()
            changed = True
    if changed:
        trigger_active = any(l.is_visible for l in panels.values())
        state = replace(state, panels=panels, trigger_active=trigger_active)
        effects.append(_emit_panels(state, cfg))

    if state.phase is SessionPhase.CONVERSATION and state.config.word_suggestions:
        sugg, request, cancelled = suggest_mod.schedule_tick(
            state.suggestion,
            now_ms,
            state.history,
            next_request_id=state.next_request_id,
            cadence_ms=cfg.suggestion_cadence_ms,
            cancel_after_ms=cfg.suggestion_cancel_after_ms,
        )
        pending = state.pending_meta
        if cancelled:
            pending = {k: v for k, v in pending.items() if k not in cancelled}
            effects.extend(CancelRequest(rid) for rid in cancelled)
        next_id = state.next_request_id
        if request is not None:
            meta = RequestMeta(channel=Channel.SUGGESTION)
            pending = {**pending, request.request_id: meta}
            next_id += 1
            effects.append(IssueRequest(request, meta))
        state = replace(
            state, suggestion=sugg, pending_meta=pending, next_request_id=next_id
        )
    return state, tuple(effects)


def utterance_arrived(
    state: SessionState, utt: Utterance, at_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    if state.phase is not SessionPhase.CONVERSATION:
        raise IllegalPhase(f"utterance in phase {state.phase.value}")
    if state.history and utt.id <= state.history[-1].id:
        raise OrderViolation(
            f"utterance id {utt.id} not after {state.history[-1].id}"
        )
    state = replace(state, history=state.history + (utt,))
    effects: list[Effect] = []
    pending = dict(state.pending_meta)
    next_id = state.next_request_id

    for channel_field, enabled in (
        ("summary_self", state.config.self_summary),
        ("summary_other", state.config.other_summary),
    ):
        if not enabled:
            continue
        chan_state: SummaryState = getattr(state, channel_field)
        chan_state, request = summarize_mod.on_utterance(
            chan_state, utt, next_request_id=next_id, now_ms=at_ms
        )
        if request is not None:
            meta = RequestMeta(channel=request.channel, utterance_id=utt.id)
            pending[request.request_id] = meta
            next_id += 1
            effects.append(IssueRequest(request, meta))
        state = replace(state, **{channel_field: chan_state})

    if state.config.offtopic_detection:
        request = offtopic_mod.make_request(
            utt, state.history, next_request_id=next_id, now_ms=at_ms
        )
        if request is not None:
            meta = RequestMeta(channel=Channel.OFFTOPIC, utterance_id=utt.id)
            pending[request.request_id] = meta
            next_id += 1
            effects.append(IssueRequest(request, meta))

    state = replace(state, pending_meta=pending, next_request_id=next_id)
    return state, tuple(effects)


def backend_arrived(
    state: SessionState, resp: BackendResponse, at_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    meta = state.pending_meta.get(resp.request_id)
    if meta is None or state.phase is not SessionPhase.CONVERSATION:
        # unknown, cancelled, or post-session: drop
        if meta is not None:
            pending = dict(state.pending_meta)
            del pending[resp.request_id]
            state = replace(state, pending_meta=pending)
        return state, ()
    pending = dict(state.pending_meta)
    del pending[resp.request_id]
    state = replace(state, pending_meta=pending)
    effects: list[Effect] = []

    if meta.channel in (Channel.SELF_SUMMARY, Channel.OTHER_SUMMARY):
        channel_field = (
            "summary_self" if meta.channel is Channel.SELF_SUMMARY else "summary_other"
        )
        chan_state: SummaryState = getattr(state, channel_field)
        before_version = chan_state.version
        chan_state, follow_up = summarize_mod.apply_summary_response(
            chan_state,
            resp,
            next_request_id=state.next_request_id,
            now_ms=at_ms,
            utterances=state.utterance_by_id(),
        )
        # the update is applied before any chained request goes out; keep the
        # effect stream in that order so log consumers see it the same way
        if chan_state.version != before_version:
            side = "self" if meta.channel is Channel.SELF_SUMMARY else "other"
            effects.append(
                Emit(
                    "summary_update",
                    {
                        "channel": side,
                        "keywords": list(chan_state.keywords),
                        "version": chan_state.version,
                    },
                )
            )
        next_id = state.next_request_id
        if follow_up is not None:
            follow_meta = RequestMeta(
                channel=follow_up.channel,
                utterance_id=chan_state.pending_utterance_id,
                attempt=chan_state.pending_attempt,
            )
            pending = dict(state.pending_meta)
            pending[follow_up.request_id] = follow_meta
            state = replace(state, pending_meta=pending)
            next_id += 1
            effects.append(IssueRequest(follow_up, follow_meta))
        state = replace(state, **{channel_field: chan_state}, next_request_id=next_id)

    elif meta.channel is Channel.SUGGESTION:
        before = state.suggestion.last_applied_request_id
        sugg = suggest_mod.apply_suggestion_response(state.suggestion, resp)
        state = replace(state, suggestion=sugg)
        if sugg.last_applied_request_id != before:
            effects.append(Emit("suggestion_update", {"words": list(sugg.words)}))

    elif meta.channel is Channel.OFFTOPIC:
        off, applied = offtopic_mod.apply_verdict_response(
            state.offtopic, resp, meta.utterance_id or 0, cfg.offtopic_ramp_k
        )
        state = replace(state, offtopic=off)
        if applied:
            effects.append(_emit_trigger(state, cfg))

    return state, tuple(effects)


def end_session(
    state: SessionState, at_ms: int, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    if state.phase is not SessionPhase.CONVERSATION:
        raise IllegalPhase(f"end_session in phase {state.phase.value}")
    state = replace(
        state,
        phase=SessionPhase.FEEDBACK,
        ended_at_ms=at_ms,
        panels=_hidden_panels(),
        trigger_active=False,
    )
    effects = (
        Emit("phase_changed", {"phase": state.phase.value, "config": state.config.to_dict()}),
        _emit_panels(state, cfg),
        Emit(
            "feedback",
            {"assist_count": state.assist_count, "confetti_bursts": state.confetti_bursts},
        ),
    )
    return state, effects


def confetti_tap(
    state: SessionState, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    if state.phase is not SessionPhase.FEEDBACK:
        raise IllegalPhase(f"confetti_tap in phase {state.phase.value}")
    state = replace(state, confetti_bursts=state.confetti_bursts + 1)
    return state, (
        Emit(
            "feedback",
            {"assist_count": state.assist_count, "confetti_bursts": state.confetti_bursts},
        ),
    )


# ---------------------------------------------------------------------------
# Reducer entrypoint
# ---------------------------------------------------------------------------


def apply_event(
    state: SessionState, event: SessionEvent, cfg: EngineConfig
) -> tuple[SessionState, tuple[Effect, ...]]:
    """Apply one ordered event; raises without state change on bad input."""
    if event.seq != state.last_seq + 1:
        raise OrderViolation(
            f"event seq {event.seq}, expected {state.last_seq + 1}"
        )
    if event.at_ms < state.clock_ms:
        raise OrderViolation(
            f"event at_ms {event.at_ms} behind clock {state.clock_ms}"
        )

    kind = event.kind
    if kind is EventKind.CONFIRM_FUNCTIONS:
        config = FeatureConfig.from_dict(event.payload.get("config", {}))
        new_state, effects = confirm_functions(state, config, event.at_ms, cfg)
    elif kind is EventKind.UTTERANCE_ARRIVED:
        utt = Utterance.from_dict(event.payload["utterance"])
        new_state, effects = utterance_arrived(state, utt, event.at_ms, cfg)
    elif kind is EventKind.GAZE_TRIGGER:
        new_state, effects = trigger_gaze(state, event.at_ms, cfg)
    elif kind is EventKind.GAZE_FOCUS:
        new_state, effects = focus_panel(state, PanelId(event.payload["panel"]), cfg)
    elif kind is EventKind.GAZE_UNFOCUS:
        new_state, effects = unfocus_panels(state, cfg)
    elif kind is EventKind.TICK:
        new_state, effects = tick(state, event.at_ms, cfg)
    elif kind is EventKind.BACKEND_ARRIVED:
        resp = BackendResponse(
            request_id=int(event.payload["request_id"]),
            text=event.payload.get("text", ""),
            latency_ms=int(event.payload.get("latency_ms", 0)),
            error=event.payload.get("error"),
        )
        new_state, effects = backend_arrived(state, resp, event.at_ms, cfg)
    elif kind in (EventKind.TRIGGER_POKED, EventKind.END_SESSION):
        if kind is EventKind.END_SESSION and state.phase is SessionPhase.FEEDBACK:
            new_state, effects = state, ()  # closing an already-ended session
        else:
            new_state, effects = end_session(state, event.at_ms, cfg)
    elif kind is EventKind.CONFETTI_TAP:
        new_state, effects = confetti_tap(state, cfg)
    else:  # pragma: no cover - exhaustive over EventKind
        raise ValueError(f"unhandled event kind {kind}")

    new_state = replace(new_state, clock_ms=event.at_ms, last_seq=event.seq)
    return new_state, effects


# ---------------------------------------------------------------------------
# Event-log serialization and replay
# ---------------------------------------------------------------------------


def event_to_json(event: SessionEvent) -> str:
    return json.dumps(
        {
            "seq": event.seq,
            "at_ms": event.at_ms,
            "kind": event.kind.value,
            "payload": event.payload,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def event_from_json(line: str) -> SessionEvent:
    obj = json.loads(line)
    return SessionEvent(
        seq=int(obj["seq"]),
        at_ms=int(obj["at_ms"]),
        kind=EventKind(obj["kind"]),
        payload=obj.get("payload", {}),
    )


def write_event_log(events: Iterable[SessionEvent], fh: IO[str]) -> None:
    for event in events:
        fh.write(event_to_json(event))
        fh.write("\n")


def read_event_log(fh: IO[str] | str) -> list[SessionEvent]:
    text = fh if isinstance(fh, str) else fh.read()
    return [event_from_json(line) for line in text.splitlines() if line.strip()]


def replay_log(
    events: Iterable[SessionEvent], cfg: EngineConfig
) -> tuple[SessionState, list[tuple[SessionEvent, tuple[Effect, ...]]]]:
    """Fold a recorded log from the initial state; rejects invalid logs."""
    state = initial_state()
    trail = []
    for event in events:
        state, effects = apply_event(state, event, cfg)
        trail.append((event, effects))
    return state, trail


@dataclass(frozen=True)
class FeedbackReport:
    """End-of-session summary; carries no utterance text by default."""

    assist_count: int
    confetti_bursts: int
    duration_ms: int
    started_at_ms: int
    ended_at_ms: int
    utterances: tuple[Utterance, ...] | None = None

    def to_dict(self) -> dict:
        d = {
            "assist_count": self.assist_count,
            "confetti_bursts": self.confetti_bursts,
            "duration_ms": self.duration_ms,
            "started_at_ms": self.started_at_ms,
            "ended_at_ms": self.ended_at_ms,
        }
        if self.utterances is not None:
            d["utterances"] = [u.to_dict() for u in self.utterances]
        return d


def build_feedback_report(
    state: SessionState, *, include_transcript: bool = False
) -> FeedbackReport:
    if state.phase is not SessionPhase.FEEDBACK:
        raise IllegalPhase("feedback report requires an ended session")
    ended = state.ended_at_ms if state.ended_at_ms is not None else state.clock_ms
    return FeedbackReport(
        assist_count=state.assist_count,
        confetti_bursts=state.confetti_bursts,
        duration_ms=ended - state.started_at_ms,
        started_at_ms=state.started_at_ms,
        ended_at_ms=ended,
        utterances=state.history if include_transcript else None,
    )
