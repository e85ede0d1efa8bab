"""Word-suggestion channel: fixed cadence, last-write-wins, no retries.

Requests fire on the logical clock every second over the full dialogue
history. Responses apply only when newer than the last applied request, so
backend completion order never matters; invalid responses are dropped and
the next tick supersedes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .prompts import build_suggestion_prompt
from .types import BackendRequest, BackendResponse, Channel, Utterance, ValidationError

MAX_WORDS = 6
_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’")]


@dataclass(frozen=True)
class SuggestionState:
    words: tuple[str, ...] = ()
    last_applied_request_id: int = 0
    next_due_ms: int = 0
    # (request_id, issued_at_ms) pairs still outstanding
    in_flight: tuple[tuple[int, int], ...] = field(default_factory=tuple)


def validate_suggestion(raw: str) -> tuple[str, ...] | ValidationError:
    """Trim, strip surrounding quotes, reject long or sentence-shaped text."""
    text = raw.strip()
    for left, right in _QUOTE_PAIRS:
        if len(text) >= 2 and text.startswith(left) and text.endswith(right):
            text = text[1:-1].strip()
            break
    if not text:
        return ValidationError("empty")
    tokens = tuple(text.split())
    if len(tokens) >= 3 and text[-1] in ".!?":
        return ValidationError("sentence", tokens)
    if len(tokens) > MAX_WORDS:
        return ValidationError("too_long", tokens)
    return tokens


def schedule_tick(
    state: SuggestionState,
    now_ms: int,
    history: tuple[Utterance, ...],
    *,
    next_request_id: int,
    cadence_ms: int = 1000,
    cancel_after_ms: int = 3000,
) -> tuple[SuggestionState, BackendRequest | None, tuple[int, ...]]:
    """Advance the cadence clock; issue a request when due and history exists.

    Returns (state, request-or-None, cancelled request ids). Requests keep
    firing while a panel is focused; due points skipped with no history do
    not burst later.
    """
    cancelled = tuple(
        rid for rid, issued in state.in_flight if now_ms - issued >= cancel_after_ms
    )
    if cancelled:
        state = replace(
            state,
            in_flight=tuple(p for p in state.in_flight if p[0] not in cancelled),
        )

    if now_ms < state.next_due_ms:
        return state, None, cancelled
    due = state.next_due_ms
    while due <= now_ms:
        due += cadence_ms
    state = replace(state, next_due_ms=due)
    if not history:
        return state, None, cancelled
    request = BackendRequest(
        request_id=next_request_id,
        channel=Channel.SUGGESTION,
        prompt=build_suggestion_prompt(history[-1], history),
        issued_at_ms=now_ms,
    )
    state = replace(state, in_flight=state.in_flight + ((next_request_id, now_ms),))
    return state, request, cancelled


def apply_suggestion_response(
    state: SuggestionState, resp: BackendResponse
) -> SuggestionState:
    """Last-write-wins: apply only newer-than-applied, valid responses."""
    state = replace(
        state,
        in_flight=tuple(p for p in state.in_flight if p[0] != resp.request_id),
    )
    if not resp.ok:
        return state
    if resp.request_id <= state.last_applied_request_id:
        return state
    tokens = validate_suggestion(resp.text)
    if isinstance(tokens, ValidationError):
        return state
    return replace(state, words=tokens, last_applied_request_id=resp.request_id)
