"""Deterministic session runner.

Replays a transcript through the reducer as a discrete-event simulation on
the logical clock: scheduler ticks, utterance arrivals and mock backend
completions are merged into one ordered stream, so the resulting event log
is a pure function of (transcript, config, seed).
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

from .backend import mock_latency_ms, mock_offtopic, mock_suggest, mock_summarize
from .config import EngineConfig
from .session import (
    Effect,
    Emit,
    EventKind,
    FeedbackReport,
    IssueRequest,
    RequestMeta,
    SessionEvent,
    SessionState,
    apply_event,
    build_feedback_report,
    initial_state,
)
from .transcript import Transcript
from .types import Channel, Speaker

# Tie-break order for simultaneous logical-clock events.
_PRIORITY = {
    EventKind.CONFIRM_FUNCTIONS: 0,
    EventKind.TICK: 1,
    EventKind.BACKEND_ARRIVED: 2,
    EventKind.UTTERANCE_ARRIVED: 3,
    EventKind.END_SESSION: 9,
}


def mock_reply_text(
    meta: RequestMeta, state_after: SessionState, topic: str, seed: int
) -> str:
    """The mock's reply for a just-issued request, from the issuing state.

    Valid because requests embed exactly the channel state they were built
    from, and effects are executed before any further event is applied.
    """
    if meta.channel in (Channel.SELF_SUMMARY, Channel.OTHER_SUMMARY):
        chan = (
            state_after.summary_self
            if meta.channel is Channel.SELF_SUMMARY
            else state_after.summary_other
        )
        utt = state_after.utterance_by_id()[meta.utterance_id]
        return mock_summarize(utt.text, chan.keywords, seed)
    if meta.channel is Channel.SUGGESTION:
        return mock_suggest(state_after.history, seed)
    if meta.channel is Channel.OFFTOPIC:
        current = state_after.utterance_by_id()[meta.utterance_id]
        priors = tuple(u for u in state_after.history if u.id != meta.utterance_id)
        return mock_offtopic(priors, current, topic)
    raise ValueError(meta.channel)


@dataclass
class ReplayResult:
    transcript: Transcript
    config: EngineConfig
    events: list[SessionEvent]
    trail: list[tuple[SessionEvent, tuple[Effect, ...]]]
    final_state: SessionState
    feedback: FeedbackReport

    @property
    def emits(self) -> list[Emit]:
        return [e for _, effects in self.trail for e in effects if isinstance(e, Emit)]


def run_replay_session(
    transcript: Transcript, cfg: EngineConfig, *, speed: float = 0.0
) -> ReplayResult:
    """Run one full headless session against the mock backend.

    ``speed`` only paces wall time (0 = as fast as possible); the logical
    event log is identical at every speed.
    """
    end_ms = transcript.end_ms
    counter = 0
    heap: list[tuple[int, int, int, EventKind, dict]] = []

    def push(at_ms: int, kind: EventKind, payload: dict) -> None:
        nonlocal counter
        heapq.heappush(heap, (at_ms, _PRIORITY[kind], counter, kind, payload))
        counter += 1

    push(0, EventKind.CONFIRM_FUNCTIONS, {"config": cfg.features.to_dict()})
    for t in range(cfg.tick_ms, end_ms + 1, cfg.tick_ms):
        push(t, EventKind.TICK, {})
    for utt in transcript.utterances:
        push(utt.t_end_ms, EventKind.UTTERANCE_ARRIVED, {"utterance": utt.to_dict()})

    state = initial_state()
    events: list[SessionEvent] = []
    trail: list[tuple[SessionEvent, tuple[Effect, ...]]] = []
    clock = 0

    def apply(kind: EventKind, payload: dict, at_ms: int) -> None:
        nonlocal state, clock
        if speed > 0 and at_ms > clock:
            time.sleep((at_ms - clock) / 1000.0 / speed)
        event = SessionEvent(seq=state.last_seq + 1, at_ms=at_ms, kind=kind, payload=payload)
        state, effects = apply_event(state, event, cfg)
        clock = at_ms
        events.append(event)
        trail.append((event, effects))
        for effect in effects:
            if isinstance(effect, IssueRequest):
                latency = mock_latency_ms(
                    effect.request.channel,
                    effect.request.request_id,
                    cfg.mock_latencies,
                    cfg.seed,
                )
                payload = {
                    "request_id": effect.request.request_id,
                    "channel": effect.request.channel.value,
                    "text": mock_reply_text(effect.meta, state, transcript.topic, cfg.seed),
                    "latency_ms": latency,
                }
                if effect.meta.utterance_id is not None:
                    payload["utterance_id"] = effect.meta.utterance_id
                push(at_ms + latency, EventKind.BACKEND_ARRIVED, payload)

    while heap:
        at_ms, _prio, _order, kind, payload = heapq.heappop(heap)
        apply(kind, payload, at_ms)

    apply(EventKind.END_SESSION, {}, max(clock, end_ms))
    feedback = build_feedback_report(state)
    return ReplayResult(
        transcript=transcript,
        config=cfg,
        events=events,
        trail=trail,
        final_state=state,
        feedback=feedback,
    )
