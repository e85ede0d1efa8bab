"""Transcript wire format and replay pacing.

File format (UTF-8, LF newlines, one JSON object per line):

    line 1:      {"topic":"<string>"}
    utterances:  {"id":N,"t_start_ms":N,"t_end_ms":N,"speaker":"self"|"partner","text":"..."}
    trailing:    {"annotation":"offtopic","from_ms":N,"to_ms":N}   (optional, metrics only)

Annotations are ground truth for evaluating the detector; they never feed it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import IO, Iterator

from .types import ParseError, Speaker, Utterance


@dataclass(frozen=True)
class OffTopicSpan:
    from_ms: int
    to_ms: int


@dataclass(frozen=True)
class Transcript:
    topic: str
    utterances: tuple[Utterance, ...] = field(default_factory=tuple)
    annotations: tuple[OffTopicSpan, ...] = field(default_factory=tuple)

    @property
    def end_ms(self) -> int:
        return max((u.t_end_ms for u in self.utterances), default=0)


def _parse_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=lineno)
    return obj


def parse_transcript(stream: IO[bytes] | IO[str] | str | bytes) -> Transcript:
    """Parse and validate a transcript; errors carry the offending line."""
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty transcript: missing topic header", line=1)

    header = _parse_line(lines[0], 1)
    if "topic" not in header or not isinstance(header["topic"], str):
        raise ParseError('header must be {"topic": "<string>"}', line=1)
    topic = header["topic"]

    utterances: list[Utterance] = []
    annotations: list[OffTopicSpan] = []
    last_end: dict[Speaker, int] = {}
    last_id = None
    seen_annotation = False
    for i, raw in enumerate(lines[1:], start=2):
        if raw.strip() == "":
            raise ParseError("blank line inside transcript", line=i)
        obj = _parse_line(raw, i)
        if "annotation" in obj:
            if obj.get("annotation") != "offtopic":
                raise ParseError(f"unknown annotation {obj.get('annotation')!r}", line=i)
            try:
                span = OffTopicSpan(from_ms=int(obj["from_ms"]), to_ms=int(obj["to_ms"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError("annotation needs integer from_ms/to_ms", line=i) from exc
            if span.to_ms < span.from_ms:
                raise ParseError("annotation to_ms < from_ms", line=i)
            annotations.append(span)
            seen_annotation = True
            continue
        if seen_annotation:
            raise ParseError("utterance after annotation block", line=i)
        try:
            utt = Utterance.from_dict(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad utterance record: {exc}", line=i) from exc
        if not utt.text.strip():
            raise ParseError("utterance text empty after trimming", line=i)
        if utt.t_end_ms < utt.t_start_ms:
            raise ParseError("t_end_ms < t_start_ms", line=i)
        if last_id is not None and utt.id <= last_id:
            raise ParseError(f"utterance id {utt.id} not increasing", line=i)
        if utterances and utt.t_start_ms < utterances[-1].t_start_ms:
            raise ParseError("utterances not sorted by t_start_ms", line=i)
        prev_end = last_end.get(utt.speaker)
        if prev_end is not None and utt.t_start_ms < prev_end:
            raise ParseError(f"overlapping utterances for speaker {utt.speaker.value}", line=i)
        last_end[utt.speaker] = utt.t_end_ms
        last_id = utt.id
        utterances.append(utt)

    return Transcript(topic=topic, utterances=tuple(utterances), annotations=tuple(annotations))


def serialize_transcript(transcript: Transcript) -> str:
    """Canonical serialization; round-trips bit-exactly through the parser."""
    out = [json.dumps({"topic": transcript.topic}, ensure_ascii=False, separators=(",", ":"))]
    for u in transcript.utterances:
        out.append(json.dumps(u.to_dict(), ensure_ascii=False, separators=(",", ":")))
    for a in transcript.annotations:
        out.append(
            json.dumps(
                {"annotation": "offtopic", "from_ms": a.from_ms, "to_ms": a.to_ms},
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    return "\n".join(out) + "\n"


def load_transcript(path: str) -> Transcript:
    with open(path, "rb") as fh:
        return parse_transcript(fh)


@dataclass(frozen=True)
class TimedEvent:
    """A (logical time, kind, payload) triple produced by replay pacing."""

    at_ms: int
    kind: str  # "utterance" | "end_session"
    payload: dict


def replay_events(transcript: Transcript) -> list[TimedEvent]:
    """The logical event stream for a transcript, independent of pacing speed.

    Utterances arrive when they finish (t_end_ms); the session ends at the
    transcript's end time. Logical timestamps never depend on replay speed.
    """
    events = [
        TimedEvent(at_ms=u.t_end_ms, kind="utterance", payload=u.to_dict())
        for u in transcript.utterances
    ]
    events.append(TimedEvent(at_ms=transcript.end_ms, kind="end_session", payload={}))
    return events


def replay(
    transcript: Transcript,
    speed: float,
    *,
    sleep=time.sleep,
    clock=time.monotonic,
) -> Iterator[TimedEvent]:
    """Yield replay events paced at 1/speed of logical time.

    speed=0 is the as-fast-as-possible sentinel: no sleeping, identical
    logical timestamps.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    events = replay_events(transcript)
    if speed == 0:
        yield from events
        return
    start = clock()
    for ev in events:
        target = start + (ev.at_ms / 1000.0) / speed
        delay = target - clock()
        if delay > 0:
            sleep(delay)
        yield ev
