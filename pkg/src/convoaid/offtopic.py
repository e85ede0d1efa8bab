"""Off-topic verdict channel driving the trigger element's red hue.

One strict Yes/No verdict per utterance; the alert level moves in 1/K steps
with symmetric decay and is kept as an integer step count so saturation and
recovery are exact. Unparseable verdicts count as No: never alarm on garbage.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .prompts import build_offtopic_prompt
from .types import BackendRequest, BackendResponse, Channel, Utterance

NEUTRAL_RGB = (0.85, 0.85, 0.85)
DEEP_RED_RGB = (0.80, 0.10, 0.10)


class Verdict(str, enum.Enum):
    YES = "yes"  # deviates from the topic
    NO = "no"


@dataclass(frozen=True)
class OffTopicState:
    level_steps: int = 0  # 0..K; level = level_steps / K
    consecutive_hits: int = 0
    # (utterance_id, verdict value) in application order
    verdict_log: tuple[tuple[int, str], ...] = field(default_factory=tuple)
    last_applied_utterance_id: int = 0

    def level(self, k: int) -> float:
        return self.level_steps / k


def parse_verdict(raw: str) -> tuple[Verdict, bool]:
    """Case-insensitive yes/no with trailing punctuation stripped.

    Returns (verdict, parse_error). Anything unrecognized maps to No with
    the error flag set.
    """
    text = raw.strip().strip(".,!?;:'\"").strip().lower()
    if text == "yes":
        return Verdict.YES, False
    if text == "no":
        return Verdict.NO, False
    return Verdict.NO, True


def update_level(state: OffTopicState, verdict: Verdict, k: int) -> OffTopicState:
    """One 1/K step up per Yes, one down per No, clamped to [0, 1]."""
    if verdict is Verdict.YES:
        return replace(
            state,
            level_steps=min(k, state.level_steps + 1),
            consecutive_hits=state.consecutive_hits + 1,
        )
    return replace(
        state,
        level_steps=max(0, state.level_steps - 1),
        consecutive_hits=0,
    )


def level_to_color(level: float) -> tuple[float, float, float]:
    """Linear blend from neutral grey to deep red, clamped, 6dp rounded."""
    t = min(1.0, max(0.0, level))
    return tuple(
        round(a + (b - a) * t, 6) for a, b in zip(NEUTRAL_RGB, DEEP_RED_RGB)
    )  # type: ignore[return-value]


def make_request(
    current: Utterance,
    history: tuple[Utterance, ...],
    *,
    next_request_id: int,
    now_ms: int,
) -> BackendRequest | None:
    """A verdict request for one utterance; none for the session's first.

    ``history`` is the full dialogue including ``current``; with nothing
    before it there is no thread to deviate from.
    """
    if len(history) < 2:
        return None
    return BackendRequest(
        request_id=next_request_id,
        channel=Channel.OFFTOPIC,
        prompt=build_offtopic_prompt(current, history),
        issued_at_ms=now_ms,
    )


def apply_verdict_response(
    state: OffTopicState,
    resp: BackendResponse,
    utterance_id: int,
    k: int,
) -> tuple[OffTopicState, bool]:
    """Apply a verdict unless it is for an already-superseded utterance.

    Returns (state, applied). Transport errors are discarded.
    """
    if not resp.ok:
        return state, False
    if utterance_id <= state.last_applied_utterance_id:
        return state, False
    verdict, _parse_error = parse_verdict(resp.text)
    state = update_level(state, verdict, k)
    state = replace(
        state,
        verdict_log=state.verdict_log + ((utterance_id, verdict.value),),
        last_applied_utterance_id=utterance_id,
    )
    return state, True
