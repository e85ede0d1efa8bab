import asyncio
import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from convoaid.backend import (
    HttpBackend,
    MockBackend,
    STOPWORDS,
    content_tokens,
    mock_latency_ms,
    mock_offtopic,
    mock_suggest,
    mock_summarize,
)
from convoaid.config import MockLatencies
from convoaid.types import BackendRequest, Channel, Speaker, Utterance

from .conftest import make_utterances


class TestMockSummarize:
    def test_riverside_sentence_by_rule(self):
        # hand application of the rule: content tokens of the sentence,
        # frequency-ranked (all 1) in first-occurrence order, no previous terms
        text = "I love Riverside Park at sunset"
        hand = [t for t in text.split() if t.lower() not in STOPWORDS]
        assert hand == ["love", "Riverside", "Park", "sunset"]
        out = mock_summarize(text, [])
        terms = [t.strip() for t in out.split(",")]
        assert set(hand) <= set(terms)
        assert 4 <= len(terms) <= 12

    def test_deterministic(self):
        args = ("We walked through the night market", ["Old Town", "lanterns"], 3)
        assert mock_summarize(*args) == mock_summarize(*args)

    def test_empty_recent_keeps_previous(self):
        prev = ["a", "b", "c", "d", "e"]
        assert mock_summarize("", prev) == "a, b, c, d, e"

    def test_merges_and_dedups_previous(self):
        out = mock_summarize("The lanterns glowed", ["lanterns", "river"])
        terms = [t.strip() for t in out.split(",")]
        assert terms.count("lanterns") == 1
        assert "river" in terms

    def test_clips_to_twelve(self):
        prev = [f"kw{i}" for i in range(12)]
        out = mock_summarize("completely new words appearing here today", prev)
        assert len(out.split(",")) == 12

    def test_frequency_beats_position(self):
        out = mock_summarize("ducks swim ducks dive ducks nest pond", [])
        first = out.split(",")[0].strip()
        assert first == "ducks"


class TestMockSuggest:
    def test_unseen_partner_tokens_surface(self):
        history = make_utterances(
            [
                ("self", 0, 500, "What should we do tonight"),
                ("partner", 600, 1500, "We could try the night market by the river"),
            ]
        )
        out = mock_suggest(history)
        assert "night market" in out

    def test_fallback_when_user_echoed_everything(self):
        history = make_utterances(
            [
                ("partner", 0, 500, "Try the night market"),
                ("self", 600, 1200, "The night market, yes, I will try it"),
            ]
        )
        assert mock_suggest(history) == "tell me more"

    def test_fallback_without_partner(self):
        history = make_utterances([("self", 0, 500, "Talking to myself here")])
        assert mock_suggest(history) == "tell me more"

    def test_token_budget_over_random_histories(self):
        rng = random.Random(11)
        vocabulary = "river park market lantern duck bridge tea lamp tree bench".split()
        for _ in range(300):
            specs = []
            t = 0
            for i in range(rng.randint(1, 8)):
                words = " ".join(rng.choices(vocabulary, k=rng.randint(1, 12)))
                speaker = rng.choice(["self", "partner"])
                specs.append((speaker, t, t + 500, words))
                t += 1000
            out = mock_suggest(make_utterances(specs))
            assert 1 <= len(out.split()) <= 6
            assert out[-1] not in ".!?"


class TestMockOfftopic:
    def _history(self):
        return make_utterances(
            [
                ("partner", 0, 1000, "What is your favorite place in the city"),
                ("self", 1500, 2500, "I love the riverside park near my home"),
            ]
        )

    def test_topic_keywords_stay_on_topic(self):
        current = Utterance(3, 3000, 4000, Speaker.SELF, "My favorite place is the park")
        assert mock_offtopic(self._history(), current, "favorite place") == "No"

    def test_novel_tokens_flagged_by_jaccard(self):
        current = Utterance(3, 3000, 4000, Speaker.SELF, "I had cereal for breakfast")
        # hand computation: current content tokens {cereal, breakfast};
        # context = {favorite, place} + tokens of the last utterances; the
        # intersection is empty so Jaccard = 0 < 0.1
        assert mock_offtopic(self._history(), current, "favorite place") == "Yes"

    def test_empty_current_fails_safe(self):
        current = Utterance(3, 3000, 4000, Speaker.SELF, "um...")
        tokens = content_tokens("um...")
        assert mock_offtopic(self._history(), current, "favorite place") in ("No", "Yes")
        empty = Utterance(4, 4100, 4200, Speaker.SELF, "...")
        assert mock_offtopic(self._history(), empty, "favorite place") == "No"


class TestCorrelation:
    def test_hundred_concurrent_submissions_correlate(self):
        """Randomized latencies, concurrent submits: every response matches
        its request id exactly once."""
        latencies = MockLatencies(summarize_ms=5, suggest_ms=5, offtopic_ms=5, jitter_ms=5)
        backend = MockBackend(latencies, seed=9)

        async def run() -> list:
            requests = [
                BackendRequest(
                    request_id=i,
                    channel=Channel.SUGGESTION,
                    prompt=f"prompt {i}",
                    issued_at_ms=0,
                )
                for i in range(1, 101)
            ]
            return await asyncio.gather(
                *(backend.submit(r, f"reply {r.request_id}") for r in requests)
            )

        responses = asyncio.run(run())
        assert len(responses) == 100
        assert sorted(r.request_id for r in responses) == list(range(1, 101))
        for r in responses:
            assert r.text == f"reply {r.request_id}"

    def test_jitter_deterministic_per_seed(self):
        latencies = MockLatencies(jitter_ms=100)
        a = [mock_latency_ms(Channel.SUGGESTION, rid, latencies, seed=4) for rid in range(50)]
        b = [mock_latency_ms(Channel.SUGGESTION, rid, latencies, seed=4) for rid in range(50)]
        c = [mock_latency_ms(Channel.SUGGESTION, rid, latencies, seed=5) for rid in range(50)]
        assert a == b
        assert a != c


class RecordingHandler(BaseHTTPRequestHandler):
    recorded: list[dict] = []
    reply_text = "canned reply"
    status = 200

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        RecordingHandler.recorded.append(
            {"body": body, "auth": self.headers.get("Authorization")}
        )
        self.send_response(RecordingHandler.status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        if RecordingHandler.status == 200:
            payload = {
                "choices": [{"message": {"role": "assistant", "content": RecordingHandler.reply_text}}]
            }
            self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def fake_server():
    RecordingHandler.recorded = []
    RecordingHandler.status = 200
    server = ThreadingHTTPServer(("127.0.0.1", 0), RecordingHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", RecordingHandler
    server.shutdown()


class TestHttpBackend:
    def test_sends_exact_prompt_bytes(self, fake_server):
        url, handler = fake_server
        backend = HttpBackend(url=url, api_key="sekret", model="test-model")
        prompt = "line one\nline two with trailing space \n- Previous Summary: a, b"
        request = BackendRequest(1, Channel.SELF_SUMMARY, prompt, 0)
        resp = asyncio.run(backend.submit(request))
        assert resp.ok and resp.text == "canned reply"
        sent = handler.recorded[0]
        assert sent["body"]["messages"] == [{"role": "user", "content": prompt}]
        assert sent["body"]["model"] == "test-model"
        assert sent["body"]["temperature"] == 0
        assert sent["auth"] == "Bearer sekret"

    def test_unreachable_host_degrades_to_error(self):
        backend = HttpBackend(url="http://127.0.0.1:9", timeout_ms=500)
        request = BackendRequest(2, Channel.SUGGESTION, "p", 0)
        resp = asyncio.run(backend.submit(request))
        assert not resp.ok
        assert resp.error.startswith(("transport", "timeout"))

    def test_rate_limit_reported(self, fake_server):
        url, handler = fake_server
        handler.status = 429
        backend = HttpBackend(url=url)
        resp = asyncio.run(backend.submit(BackendRequest(3, Channel.OFFTOPIC, "p", 0)))
        assert resp.error == "rate_limited"

    def test_missing_url_rejected(self, monkeypatch):
        monkeypatch.delenv("LLM_API_URL", raising=False)
        with pytest.raises(ValueError):
            HttpBackend()
