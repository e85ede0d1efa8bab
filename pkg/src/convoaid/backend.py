"""Language-model boundary: deterministic mock rules and a generic HTTP client.

The mock is a rule-based stand-in that makes every session a pure function of
(transcript, config, seed); the HTTP client speaks the common chat-completion
JSON contract so any compatible provider works.
"""

from __future__ import annotations

import asyncio
import os
import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import httpx

from .config import MockLatencies
from .types import BackendRequest, BackendResponse, Channel, Speaker, Utterance

# Small frozen function-word list; versioned with the mock rules.
STOPWORDS = frozenset(
    """
    a an the and or but if then else when while of to in on at by for with
    about into over after before under between out off up down again further
    i me my we our you your he him his she her it its they them their this
    that these those is are was were be been being am do does did doing have
    has had having will would can could should shall may might must not no
    nor so than too very just also there here what which who whom whose why
    how all any both each few more most other some such only own same as
    because until during s t don now
    """.split()
)

_TOKEN_RE = re.compile(r"[A-Za-z0-9']+")


def content_tokens(text: str) -> list[str]:
    """Word tokens minus stopwords, original casing preserved."""
    return [t for t in _TOKEN_RE.findall(text) if t.lower() not in STOPWORDS]


def mock_summarize(recent_text: str, prev_keywords: Sequence[str], seed: int = 0) -> str:
    """Summary rule: top content tokens of the utterance, then prior terms.

    Up to 8 highest-frequency content tokens (ties by first occurrence) are
    merged with the previous keywords, deduplicated case-insensitively, and
    clipped to 12 terms with the newest material first.
    """
    tokens = content_tokens(recent_text)
    counts = Counter(t.lower() for t in tokens)
    first_seen: dict[str, int] = {}
    first_form: dict[str, str] = {}
    for i, t in enumerate(tokens):
        key = t.lower()
        if key not in first_seen:
            first_seen[key] = i
            first_form[key] = t
    ranked = sorted(counts, key=lambda k: (-counts[k], first_seen[k]))[:8]
    terms = [first_form[k] for k in ranked]
    seen = {t.lower() for t in terms}
    for kw in prev_keywords:
        if kw.lower() not in seen:
            terms.append(kw)
            seen.add(kw.lower())
    return ", ".join(terms[:12])


def mock_suggest(history: Sequence[Utterance], seed: int = 0) -> str:
    """Continuation rule: unseen content words from the partner's last turn.

    Falls back to a fixed phrase when the user has already echoed everything
    (or the partner has not spoken). Never more than 4 tokens, never
    sentence-terminated.
    """
    last_partner = next(
        (u for u in reversed(history) if u.speaker is Speaker.PARTNER), None
    )
    if last_partner is None:
        return "tell me more"
    spoken = {
        t.lower()
        for u in history
        if u.speaker is Speaker.SELF
        for t in content_tokens(u.text)
    }
    fresh = [t for t in content_tokens(last_partner.text) if t.lower() not in spoken]
    if not fresh:
        return "tell me more"
    return " ".join(fresh[:4])


def mock_offtopic(
    history: Sequence[Utterance], current: Utterance, topic_seed: str
) -> str:
    """Yes/No by Jaccard overlap with the topic plus the last three turns."""
    current_tokens = {t.lower() for t in content_tokens(current.text)}
    if not current_tokens:
        return "No"
    context = {t.lower() for t in content_tokens(topic_seed)}
    for u in history[-3:]:
        context.update(t.lower() for t in content_tokens(u.text))
    union = current_tokens | context
    overlap = len(current_tokens & context) / len(union) if union else 0.0
    return "No" if overlap >= 0.1 else "Yes"


def mock_latency_ms(channel: Channel, request_id: int, latencies: MockLatencies, seed: int) -> int:
    base = {
        Channel.SELF_SUMMARY: latencies.summarize_ms,
        Channel.OTHER_SUMMARY: latencies.summarize_ms,
        Channel.SUGGESTION: latencies.suggest_ms,
        Channel.OFFTOPIC: latencies.offtopic_ms,
    }[channel]
    if latencies.jitter_ms:
        rng = random.Random((seed << 20) ^ request_id)
        base = max(0, base + rng.randint(-latencies.jitter_ms, latencies.jitter_ms))
    return base


@dataclass
class MockBackend:
    """Async wrapper used by the live service; replays bypass it and schedule
    the same reply text on the logical clock instead."""

    latencies: MockLatencies
    seed: int = 0

    async def submit(self, request: BackendRequest, reply_text: str) -> BackendResponse:
        delay = mock_latency_ms(request.channel, request.request_id, self.latencies, self.seed)
        await asyncio.sleep(delay / 1000.0)
        return BackendResponse(
            request_id=request.request_id, text=reply_text, latency_ms=delay
        )


ENV_URL = "LLM_API_URL"
ENV_KEY = "LLM_API_KEY"
ENV_MODEL = "LLM_MODEL"
DEFAULT_MODEL = "gpt-4o"


class HttpBackend:
    """Generic chat-completion client.

    Sends {model, messages:[{role:"user", content: prompt}]} with temperature
    0 and reads the first choice's message content. Prompts and responses are
    held in memory only.
    """

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout_ms: int = 10_000,
    ):
        self.url = url or os.environ.get(ENV_URL, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, DEFAULT_MODEL)
        self.timeout_ms = timeout_ms
        if not self.url:
            raise ValueError(f"HTTP backend needs a URL ({ENV_URL} or explicit)")

    def payload(self, request: BackendRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": 0,
        }

    async def submit(self, request: BackendRequest) -> BackendResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            async with httpx.AsyncClient(timeout=self.timeout_ms / 1000.0) as client:
                started = asyncio.get_event_loop().time()
                resp = await client.post(self.url, json=self.payload(request), headers=headers)
                elapsed_ms = int((asyncio.get_event_loop().time() - started) * 1000)
        except httpx.TimeoutException:
            return BackendResponse(request_id=request.request_id, error="timeout")
        except httpx.HTTPError as exc:
            return BackendResponse(
                request_id=request.request_id, error=f"transport: {exc.__class__.__name__}"
            )
        if resp.status_code == 429:
            return BackendResponse(request_id=request.request_id, error="rate_limited")
        if resp.status_code != 200:
            return BackendResponse(
                request_id=request.request_id, error=f"http_{resp.status_code}"
            )
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            return BackendResponse(
                request_id=request.request_id, error=f"bad_response: {exc}"
            )
        return BackendResponse(
            request_id=request.request_id, text=str(text), latency_ms=elapsed_ms
        )
