"""Self/other summarization channel.

Each channel serializes its requests: one in flight, later utterances queue.
Every request embeds the previous summary so summaries evolve incrementally;
responses are validated to 4-12 keyword terms, with one retry and then a
clamp so the panel never goes blank.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping

from .prompts import build_summary_prompt
from .types import (
    BackendRequest,
    BackendResponse,
    Channel,
    Speaker,
    Utterance,
    ValidationError,
)

MIN_TERMS = 4
MAX_TERMS = 12
MAX_TERM_WORDS = 4

RETRY_SUFFIX = (
    "\n\nReminder: respond with 4 to 12 comma-separated keyword terms, "
    "each at most 4 words, and nothing else."
)


@dataclass(frozen=True)
class SummaryState:
    speaker: Speaker
    keywords: tuple[str, ...] = ()
    version: int = 0
    pending: int | None = None
    pending_utterance_id: int | None = None
    pending_attempt: int = 0
    queue: tuple[int, ...] = field(default_factory=tuple)

    @property
    def channel(self) -> Channel:
        return Channel.SELF_SUMMARY if self.speaker is Speaker.SELF else Channel.OTHER_SUMMARY


def validate_summary(raw: str) -> tuple[str, ...] | ValidationError:
    """Split on commas/newlines into terms; accept 4-12 terms of <=4 words."""
    terms = tuple(t.strip() for t in re.split(r"[,\n]", raw) if t.strip())
    for term in terms:
        if len(term.split()) > MAX_TERM_WORDS:
            return ValidationError("term_too_long", terms)
    if len(terms) < MIN_TERMS:
        return ValidationError("too_few", terms)
    if len(terms) > MAX_TERMS:
        return ValidationError("too_many", terms)
    return terms


def clamp_terms(terms: tuple[str, ...]) -> tuple[str, ...]:
    """Force a best-effort keyword list out of an invalid response.

    Overlong terms are split in half, the list is truncated to 12, and short
    lists are padded by splitting the longest multi-word terms. Anything with
    at least one term is accepted.
    """
    work = [t for t in terms if t.strip()]
    # split terms that exceed the per-term word cap
    i = 0
    while i < len(work):
        words = work[i].split()
        if len(words) > MAX_TERM_WORDS:
            mid = (len(words) + 1) // 2
            work[i : i + 1] = [" ".join(words[:mid]), " ".join(words[mid:])]
        else:
            i += 1
    work = work[:MAX_TERMS]
    while 0 < len(work) < MIN_TERMS:
        lengths = [len(t.split()) for t in work]
        longest = max(range(len(work)), key=lambda j: lengths[j])
        if lengths[longest] < 2:
            break
        words = work[longest].split()
        mid = (len(words) + 1) // 2
        work[longest : longest + 1] = [" ".join(words[:mid]), " ".join(words[mid:])]
    return tuple(work[:MAX_TERMS])


def _issue(
    state: SummaryState,
    utt: Utterance,
    request_id: int,
    now_ms: int,
    *,
    retry: bool = False,
) -> tuple[SummaryState, BackendRequest]:
    prompt = build_summary_prompt(utt, state.keywords)
    if retry:
        prompt += RETRY_SUFFIX
    request = BackendRequest(
        request_id=request_id,
        channel=state.channel,
        prompt=prompt,
        issued_at_ms=now_ms,
    )
    new = replace(
        state,
        pending=request_id,
        pending_utterance_id=utt.id,
        pending_attempt=2 if retry else 1,
    )
    return new, request


def on_utterance(
    state: SummaryState,
    utt: Utterance,
    *,
    next_request_id: int,
    now_ms: int,
) -> tuple[SummaryState, BackendRequest | None]:
    """Issue a chained request for a matching utterance, or queue it."""
    if utt.speaker is not state.speaker:
        return state, None
    if state.pending is not None:
        return replace(state, queue=state.queue + (utt.id,)), None
    return _issue(state, utt, next_request_id, now_ms)


def _pop_queue(
    state: SummaryState,
    *,
    next_request_id: int,
    now_ms: int,
    utterances: Mapping[int, Utterance],
) -> tuple[SummaryState, BackendRequest | None]:
    state = replace(state, pending=None, pending_utterance_id=None, pending_attempt=0)
    if not state.queue:
        return state, None
    head, rest = state.queue[0], state.queue[1:]
    state = replace(state, queue=rest)
    return _issue(state, utterances[head], next_request_id, now_ms)


def apply_summary_response(
    state: SummaryState,
    resp: BackendResponse,
    *,
    next_request_id: int,
    now_ms: int,
    utterances: Mapping[int, Utterance],
) -> tuple[SummaryState, BackendRequest | None]:
    """Apply/retry/clamp a response, then chain the next queued utterance.

    Stale responses (request id not the pending one) are discarded unchanged.
    Transport failures consume the pending slot without touching keywords so
    the queue keeps draining.
    """
    if resp.request_id != state.pending:
        return state, None
    if not resp.ok:
        return _pop_queue(
            state, next_request_id=next_request_id, now_ms=now_ms, utterances=utterances
        )

    result = validate_summary(resp.text)
    if isinstance(result, ValidationError):
        if state.pending_attempt < 2:
            utt = utterances[state.pending_utterance_id]  # type: ignore[index]
            return _issue(state, utt, next_request_id, now_ms, retry=True)
        clamped = clamp_terms(result.terms)
        if clamped:
            state = replace(state, keywords=clamped, version=state.version + 1)
        # nothing salvageable: keep the previous keywords, no version bump
    else:
        state = replace(state, keywords=result, version=state.version + 1)
    return _pop_queue(
        state, next_request_id=next_request_id, now_ms=now_ms, utterances=utterances
    )
