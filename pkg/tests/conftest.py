from __future__ import annotations

from pathlib import Path

import pytest

from convoaid.config import EngineConfig, MockLatencies
from convoaid.transcript import Transcript, load_transcript
from convoaid.types import Speaker, Utterance

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "convoaid" / "data"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

TOPIC1 = DATA_DIR / "topic1_favorite_place.ndjson"


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {verdict}", flush=True)


@pytest.fixture(scope="session")
def topic1() -> Transcript:
    return load_transcript(str(TOPIC1))


@pytest.fixture
def fast_cfg() -> EngineConfig:
    """Zero-latency mock config for fast unit runs."""
    return EngineConfig(mock_latencies=MockLatencies(0, 0, 0))


def make_utterances(specs: list[tuple[str, int, int, str]]) -> tuple[Utterance, ...]:
    """specs: (speaker, t_start_ms, t_end_ms, text) with auto ids."""
    return tuple(
        Utterance(
            id=i + 1,
            t_start_ms=start,
            t_end_ms=end,
            speaker=Speaker(spk),
            text=text,
        )
        for i, (spk, start, end, text) in enumerate(specs)
    )


def make_transcript(
    specs: list[tuple[str, int, int, str]], topic: str = "test topic"
) -> Transcript:
    return Transcript(topic=topic, utterances=make_utterances(specs))
