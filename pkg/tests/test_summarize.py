from dataclasses import replace

from convoaid.prompts import build_summary_prompt, load_template
from convoaid.summarize import (
    RETRY_SUFFIX,
    SummaryState,
    apply_summary_response,
    clamp_terms,
    on_utterance,
    validate_summary,
)
from convoaid.types import BackendResponse, Speaker, Utterance, ValidationError

from .conftest import make_utterances


def utt(i, speaker, text):
    return Utterance(id=i, t_start_ms=i * 1000, t_end_ms=i * 1000 + 500,
                     speaker=Speaker(speaker), text=text)


class TestValidate:
    def test_four_terms_valid(self):
        raw = "Calendar Update, Package Delivery, John Greeting, Anger Expression"
        assert validate_summary(raw) == (
            "Calendar Update",
            "Package Delivery",
            "John Greeting",
            "Anger Expression",
        )

    def test_thirteen_terms_too_many(self):
        raw = ", ".join(f"term{i}" for i in range(13))
        result = validate_summary(raw)
        assert isinstance(result, ValidationError)
        assert result.reason == "too_many"
        assert len(result.terms) == 13

    def test_three_terms_too_few(self):
        result = validate_summary("Greeting, Repetition, Informal Tone")
        assert isinstance(result, ValidationError)
        assert result.reason == "too_few"
        assert result.terms == ("Greeting", "Repetition", "Informal Tone")

    def test_newline_separated_accepted(self):
        assert validate_summary("a\nb\nc\nd") == ("a", "b", "c", "d")

    def test_term_over_four_words_rejected(self):
        result = validate_summary("one, two, three, this term has five words")
        assert isinstance(result, ValidationError)
        assert result.reason == "term_too_long"

    def test_empties_dropped(self):
        assert validate_summary("a,, b, ,c , d") == ("a", "b", "c", "d")


class TestClamp:
    def test_truncates_to_twelve(self):
        terms = tuple(f"t{i}" for i in range(15))
        assert clamp_terms(terms) == terms[:12]

    def test_pads_by_splitting_longest(self):
        clamped = clamp_terms(("Greeting", "Repetition", "Informal Tone"))
        assert len(clamped) == 4
        assert "Informal" in clamped and "Tone" in clamped

    def test_splits_overlong_terms(self):
        clamped = clamp_terms(("alpha beta gamma delta epsilon",))
        assert all(len(t.split()) <= 4 for t in clamped)
        assert len(clamped) >= 2

    def test_single_unsplittable_term_accepted(self):
        assert clamp_terms(("onlyword",)) == ("onlyword",)

    def test_empty_stays_empty(self):
        assert clamp_terms(()) == ()


class TestPrompt:
    def test_first_request_has_empty_previous_summary(self):
        prompt = build_summary_prompt(utt(1, "self", "hello world"), ())
        assert "- Previous Summary: \n" in prompt or prompt.endswith("- Previous Summary: ")

    def test_contains_limit_instruction(self):
        prompt = build_summary_prompt(utt(1, "self", "x"), ())
        assert "Stay within the character limit strictly." in prompt

    def test_previous_terms_comma_joined(self):
        prompt = build_summary_prompt(
            utt(1, "self", "x"), ("Greeting", "Repetition", "Informal Tone")
        )
        assert "- Previous Summary: Greeting, Repetition, Informal Tone" in prompt

    def test_prompt_is_template_with_fields(self):
        u = utt(1, "self", "I fed the ducks")
        prompt = build_summary_prompt(u, ("Parks",))
        expected = load_template("prompt_summary.txt").format(
            recent_utterance="I fed the ducks", previous_summary="Parks"
        )
        assert prompt == expected


class TestChannelFlow:
    def test_idle_channel_issues_one_request(self):
        state = SummaryState(speaker=Speaker.SELF)
        state, req = on_utterance(state, utt(1, "self", "hello"), next_request_id=10, now_ms=500)
        assert req is not None and req.request_id == 10
        assert state.pending == 10
        assert state.queue == ()

    def test_partner_utterance_ignored_on_self_channel(self):
        state = SummaryState(speaker=Speaker.SELF)
        new, req = on_utterance(state, utt(1, "partner", "hi"), next_request_id=1, now_ms=0)
        assert req is None and new == state

    def test_busy_channel_queues_three(self):
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utt(1, "self", "a"), next_request_id=1, now_ms=0)
        for i in (2, 3, 4):
            state, req = on_utterance(state, utt(i, "self", "x"), next_request_id=99, now_ms=0)
            assert req is None
        assert state.queue == (2, 3, 4)
        assert state.pending == 1

    def test_valid_response_applies_and_chains_on_new_keywords(self):
        utts = {i: utt(i, "self", f"utterance {i}") for i in (1, 7, 8)}
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utts[1], next_request_id=1, now_ms=0)
        state = replace(state, queue=(7, 8))
        resp = BackendResponse(request_id=1, text="alpha, beta, gamma, delta")
        state, follow = apply_summary_response(
            state, resp, next_request_id=2, now_ms=100, utterances=utts
        )
        assert state.keywords == ("alpha", "beta", "gamma", "delta")
        assert state.version == 1
        assert follow is not None
        assert "- Previous Summary: alpha, beta, gamma, delta" in follow.prompt
        assert "- Recent Utterance: utterance 7" in follow.prompt
        assert state.queue == (8,)

    def test_valid_response_empty_queue_clears_pending(self):
        utts = {1: utt(1, "self", "a")}
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utts[1], next_request_id=1, now_ms=0)
        state, follow = apply_summary_response(
            state,
            BackendResponse(request_id=1, text="a, b, c, d"),
            next_request_id=2,
            now_ms=1,
            utterances=utts,
        )
        assert follow is None and state.pending is None

    def test_stale_response_discarded(self):
        utts = {1: utt(1, "self", "a")}
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utts[1], next_request_id=5, now_ms=0)
        new, follow = apply_summary_response(
            state,
            BackendResponse(request_id=4, text="a, b, c, d"),
            next_request_id=6,
            now_ms=1,
            utterances=utts,
        )
        assert new == state and follow is None
        assert new.version == 0

    def test_invalid_then_retry_then_clamp(self):
        utts = {1: utt(1, "self", "greetings")}
        state = SummaryState(speaker=Speaker.SELF)
        state, first = on_utterance(state, utts[1], next_request_id=1, now_ms=0)

        bad = BackendResponse(request_id=1, text="Greeting, Repetition, Informal Tone")
        state, retry = apply_summary_response(
            state, bad, next_request_id=2, now_ms=10, utterances=utts
        )
        assert retry is not None
        assert retry.prompt == first.prompt + RETRY_SUFFIX
        assert state.version == 0 and state.pending == 2

        bad2 = BackendResponse(request_id=2, text="Greeting, Repetition, Informal Tone")
        state, follow = apply_summary_response(
            state, bad2, next_request_id=3, now_ms=20, utterances=utts
        )
        assert follow is None
        assert state.version == 1
        assert len(state.keywords) == 4  # clamp split "Informal Tone"

    def test_retry_capped_at_one(self):
        utts = {1: utt(1, "self", "a"), 2: utt(2, "self", "b")}
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utts[1], next_request_id=1, now_ms=0)
        state, _ = on_utterance(state, utts[2], next_request_id=99, now_ms=0)
        issued = 1
        rid = 1
        # drive nothing-but-garbage responses; count issued requests
        for _ in range(10):
            state, follow = apply_summary_response(
                state,
                BackendResponse(request_id=rid, text=""),
                next_request_id=rid + 1,
                now_ms=0,
                utterances=utts,
            )
            if follow is None:
                break
            issued += 1
            rid = follow.request_id
        # 2 utterances, each one original + one retry at most
        assert issued <= 4
        assert state.pending is None and state.queue == ()

    def test_transport_error_keeps_queue_draining(self):
        utts = {1: utt(1, "self", "a"), 2: utt(2, "self", "b")}
        state = SummaryState(speaker=Speaker.SELF)
        state, _ = on_utterance(state, utts[1], next_request_id=1, now_ms=0)
        state, _ = on_utterance(state, utts[2], next_request_id=99, now_ms=0)
        state, follow = apply_summary_response(
            state,
            BackendResponse(request_id=1, error="timeout"),
            next_request_id=2,
            now_ms=0,
            utterances=utts,
        )
        assert state.version == 0
        assert follow is not None and follow.request_id == 2
        assert state.pending == 2 and state.queue == ()
