import time

import pytest

from convoaid.transcript import (
    load_transcript,
    parse_transcript,
    replay,
    replay_events,
    serialize_transcript,
)
from convoaid.types import ParseError, Speaker

from .conftest import TOPIC1, make_transcript

VALID = (
    '{"topic":"test"}\n'
    '{"id":1,"t_start_ms":0,"t_end_ms":1000,"speaker":"self","text":"hello there"}\n'
    '{"id":2,"t_start_ms":1500,"t_end_ms":2500,"speaker":"partner","text":"hi yourself"}\n'
    '{"id":3,"t_start_ms":3000,"t_end_ms":4200,"speaker":"self","text":"how are you"}\n'
)


def test_parse_three_lines():
    t = parse_transcript(VALID)
    assert t.topic == "test"
    assert len(t.utterances) == 3
    assert t.utterances[1].speaker is Speaker.PARTNER
    assert t.end_ms == 4200


def test_roundtrip_idempotent():
    t = parse_transcript(VALID)
    assert serialize_transcript(t) == VALID
    assert serialize_transcript(parse_transcript(serialize_transcript(t))) == VALID


def test_end_before_start_rejected_with_line():
    bad = VALID + '{"id":4,"t_start_ms":5000,"t_end_ms":4500,"speaker":"self","text":"x"}\n'
    with pytest.raises(ParseError) as exc:
        parse_transcript(bad)
    assert exc.value.line == 5


def test_empty_text_rejected():
    bad = VALID + '{"id":4,"t_start_ms":5000,"t_end_ms":5500,"speaker":"self","text":"   "}\n'
    with pytest.raises(ParseError):
        parse_transcript(bad)


def test_same_speaker_overlap_rejected():
    bad = (
        '{"topic":"t"}\n'
        '{"id":1,"t_start_ms":0,"t_end_ms":2000,"speaker":"self","text":"one"}\n'
        '{"id":2,"t_start_ms":1000,"t_end_ms":3000,"speaker":"self","text":"two"}\n'
    )
    with pytest.raises(ParseError, match="overlapping"):
        parse_transcript(bad)


def test_cross_speaker_overlap_allowed():
    ok = (
        '{"topic":"t"}\n'
        '{"id":1,"t_start_ms":0,"t_end_ms":2000,"speaker":"self","text":"one"}\n'
        '{"id":2,"t_start_ms":1000,"t_end_ms":3000,"speaker":"partner","text":"two"}\n'
    )
    assert len(parse_transcript(ok).utterances) == 2


def test_non_increasing_ids_rejected():
    bad = (
        '{"topic":"t"}\n'
        '{"id":2,"t_start_ms":0,"t_end_ms":100,"speaker":"self","text":"one"}\n'
        '{"id":2,"t_start_ms":200,"t_end_ms":300,"speaker":"self","text":"two"}\n'
    )
    with pytest.raises(ParseError, match="not increasing"):
        parse_transcript(bad)


def test_malformed_json_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_transcript('{"topic":"t"}\nnot json\n')
    assert exc.value.line == 2


def test_bundled_topic1_parses_with_supplement():
    t = load_transcript(str(TOPIC1))
    assert t.topic == "favorite place"
    supplement = [
        u
        for u in t.utterances
        if "my favorite place in the city is Riverside Park" in u.text
    ]
    assert supplement and supplement[0].speaker is Speaker.PARTNER


def test_annotations_parsed_in_topic1():
    t = load_transcript(str(TOPIC1))
    assert len(t.annotations) == 3
    assert all(a.to_ms > a.from_ms for a in t.annotations)


class TestReplayPacing:
    def test_speed_zero_matches_speed_one_logically(self):
        t = make_transcript(
            [("self", 0, 300, "a b"), ("partner", 400, 700, "c d"), ("self", 900, 1200, "e")]
        )
        fast = list(replay(t, 0))
        paced = list(replay(t, 50.0))  # 50x so the test stays quick
        assert fast == paced

    def test_empty_transcript_emits_only_end(self):
        t = make_transcript([])
        events = list(replay(t, 0))
        assert [e.kind for e in events] == ["end_session"]
        assert events[0].at_ms == 0

    def test_speed_scaling_halves_wall_time(self):
        t = make_transcript([("self", 0, 100, "a"), ("partner", 500, 1000, "b")])
        slow_t0 = time.monotonic()
        slow = list(replay(t, 2.0))
        slow_wall = time.monotonic() - slow_t0
        fast_t0 = time.monotonic()
        fast = list(replay(t, 4.0))
        fast_wall = time.monotonic() - fast_t0
        assert slow == fast  # identical logical timestamps
        assert slow_wall == pytest.approx(1.0 / 2.0, abs=0.15)
        assert fast_wall == pytest.approx(1.0 / 4.0, abs=0.15)

    def test_events_carry_transcript_times(self):
        t = make_transcript([("self", 0, 300, "a"), ("partner", 400, 700, "b")])
        events = replay_events(t)
        assert [e.at_ms for e in events] == [300, 700, 700]
        assert [e.kind for e in events] == ["utterance", "utterance", "end_session"]

    def test_negative_speed_rejected(self):
        t = make_transcript([])
        with pytest.raises(ValueError):
            list(replay(t, -1.0))
