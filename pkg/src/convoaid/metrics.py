"""Session measurements: pauses, off-topic episodes, backend statistics, and
the matched-pairs signed-rank test for A/B comparisons.

All computations are pure batch functions over a recorded event log and/or a
transcript; identical inputs always produce a byte-identical report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .config import EngineConfig
from .session import Emit, EventKind, SessionEvent, replay_log
from .transcript import OffTopicSpan, Transcript
from .types import ConvoaidError, SessionPhase, Speaker, Utterance


class AmbiguousSource(ConvoaidError):
    """Both detector verdicts and annotations were supplied."""


class SessionIncomplete(ConvoaidError):
    """Report requested for a session that never reached the feedback phase."""


class NZeroError(ValueError):
    """No nonzero differences left for the signed-rank test."""


@dataclass(frozen=True)
class Pause:
    from_ms: int
    to_ms: int

    @property
    def duration_ms(self) -> int:
        return self.to_ms - self.from_ms


def detect_pauses(
    utterances: Sequence[Utterance] | Transcript, threshold_ms: int = 2000
) -> list[Pause]:
    """Inter-utterance silences >= threshold that end with the user speaking.

    Silence is measured from the latest end of any earlier utterance, so
    cross-speaker overlap never creates phantom gaps.
    """
    if threshold_ms <= 0:
        raise ValueError("threshold_ms must be > 0")
    if isinstance(utterances, Transcript):
        utterances = utterances.utterances
    ordered = sorted(utterances, key=lambda u: (u.t_start_ms, u.id))
    pauses: list[Pause] = []
    running_end: int | None = None
    for u in ordered:
        if running_end is not None:
            gap = u.t_start_ms - running_end
            if gap >= threshold_ms and u.speaker is Speaker.SELF:
                pauses.append(Pause(from_ms=running_end, to_ms=u.t_start_ms))
        running_end = u.t_end_ms if running_end is None else max(running_end, u.t_end_ms)
    return pauses


@dataclass(frozen=True)
class OffTopicEpisode:
    from_ms: int
    to_ms: int
    source: str  # "detector" | "annotation"

    @property
    def duration_ms(self) -> int:
        return self.to_ms - self.from_ms


def detect_offtopic_episodes(
    *,
    verdict_log: Sequence[tuple[int, str]] | None = None,
    annotations: Sequence[OffTopicSpan] | None = None,
    transcript: Transcript | None = None,
    session_end_ms: int | None = None,
) -> list[OffTopicEpisode]:
    """Episodes from exactly one source.

    Detector verdicts: one episode per maximal run of Yes, from the first Yes
    utterance's start to the next No utterance's start (or session end).
    Annotations: the recorded spans, merged where they overlap.
    """
    if verdict_log is not None and annotations is not None:
        raise AmbiguousSource("supply verdicts or annotations, not both")
    if annotations is not None:
        episodes: list[OffTopicEpisode] = []
        for span in sorted(annotations, key=lambda s: (s.from_ms, s.to_ms)):
            if episodes and span.from_ms <= episodes[-1].to_ms:
                last = episodes[-1]
                episodes[-1] = OffTopicEpisode(
                    last.from_ms, max(last.to_ms, span.to_ms), "annotation"
                )
            else:
                episodes.append(OffTopicEpisode(span.from_ms, span.to_ms, "annotation"))
        return episodes
    if verdict_log is None:
        raise ValueError("one of verdict_log/annotations is required")
    if transcript is None:
        raise ValueError("verdict episodes need the transcript for timestamps")

    starts = {u.id: u.t_start_ms for u in transcript.utterances}
    end_ms = session_end_ms if session_end_ms is not None else transcript.end_ms
    episodes = []
    open_from: int | None = None
    for utt_id, verdict in verdict_log:
        at = starts.get(utt_id)
        if at is None:
            continue
        if verdict == "yes" and open_from is None:
            open_from = at
        elif verdict == "no" and open_from is not None:
            episodes.append(OffTopicEpisode(open_from, at, "detector"))
            open_from = None
    if open_from is not None:
        episodes.append(OffTopicEpisode(open_from, max(end_ms, open_from), "detector"))
    return episodes


@dataclass(frozen=True)
class LlmStats:
    mean_words: float
    sd_words: float
    mean_s: float
    sd_s: float

    def to_dict(self) -> dict:
        return {
            "mean_words": round(self.mean_words, 6),
            "sd_words": round(self.sd_words, 6),
            "mean_s": round(self.mean_s, 6),
            "sd_s": round(self.sd_s, 6),
        }


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    # empty lists report 0 alongside a zero count; single samples have sd 0
    if not values:
        return 0.0, 0.0
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def _stats(word_counts: Sequence[int], latencies_ms: Sequence[int]) -> LlmStats:
    mean_w, sd_w = _mean_sd(word_counts)
    mean_s, sd_s = _mean_sd([ms / 1000.0 for ms in latencies_ms])
    return LlmStats(mean_w, sd_w, mean_s, sd_s)


@dataclass(frozen=True)
class MetricsReport:
    pause_count: int
    avg_pause_ms: float
    offtopic_count: int
    avg_offtopic_ms: float
    assist_count: int
    llm_summarize: LlmStats
    llm_suggest: LlmStats
    detector_diagnostic: dict | None = None  # vs ground-truth annotations only

    def to_dict(self) -> dict:
        d = {
            "pause_count": self.pause_count,
            "avg_pause_ms": round(self.avg_pause_ms, 6),
            "offtopic_count": self.offtopic_count,
            "avg_offtopic_ms": round(self.avg_offtopic_ms, 6),
            "assist_count": self.assist_count,
            "llm_summarize": self.llm_summarize.to_dict(),
            "llm_suggest": self.llm_suggest.to_dict(),
        }
        if self.detector_diagnostic is not None:
            d["detector_diagnostic"] = self.detector_diagnostic
        return d


def serialize_report(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _overlap_ms(a: Iterable[OffTopicEpisode], b: Iterable[OffTopicEpisode]) -> int:
    total = 0
    for x in a:
        for y in b:
            total += max(0, min(x.to_ms, y.to_ms) - max(x.from_ms, y.from_ms))
    return total


def compute_report(
    events: Sequence[SessionEvent],
    transcript: Transcript | None = None,
    threshold_ms: int = 2000,
    cfg: EngineConfig | None = None,
) -> MetricsReport:
    """All session metrics from a completed event log.

    The log is replayed through the reducer (with the config it was recorded
    under) to recover which backend responses were actually applied. When no
    transcript is given, utterances are reconstructed from the log; detector
    diagnostics need the annotated transcript.
    """
    cfg = cfg or EngineConfig()
    state, trail = replay_log(events, cfg)
    if state.phase is not SessionPhase.FEEDBACK:
        raise SessionIncomplete("event log never reaches the feedback phase")

    if transcript is None:
        transcript = Transcript(topic="", utterances=state.history)

    summarize_words: list[int] = []
    summarize_ms: list[int] = []
    suggest_words: list[int] = []
    suggest_ms: list[int] = []
    for event, effects in trail:
        if event.kind is not EventKind.BACKEND_ARRIVED:
            continue
        latency = int(event.payload.get("latency_ms", 0))
        for effect in effects:
            if not isinstance(effect, Emit):
                continue
            if effect.type == "summary_update":
                summarize_words.append(
                    sum(len(term.split()) for term in effect.payload["keywords"])
                )
                summarize_ms.append(latency)
            elif effect.type == "suggestion_update":
                suggest_words.append(len(effect.payload["words"]))
                suggest_ms.append(latency)

    pauses = detect_pauses(transcript, threshold_ms)
    episodes = detect_offtopic_episodes(
        verdict_log=state.offtopic.verdict_log,
        transcript=transcript,
        session_end_ms=state.ended_at_ms,
    )
    avg_pause = sum(p.duration_ms for p in pauses) / len(pauses) if pauses else 0.0
    avg_episode = (
        sum(e.duration_ms for e in episodes) / len(episodes) if episodes else 0.0
    )

    diagnostic = None
    if transcript.annotations:
        annotated = detect_offtopic_episodes(annotations=transcript.annotations)
        detected_ms = sum(e.duration_ms for e in episodes)
        annotated_ms = sum(e.duration_ms for e in annotated)
        overlap = _overlap_ms(episodes, annotated)
        diagnostic = {
            "precision": round(overlap / detected_ms, 6) if detected_ms else 0.0,
            "recall": round(overlap / annotated_ms, 6) if annotated_ms else 0.0,
        }

    return MetricsReport(
        pause_count=len(pauses),
        avg_pause_ms=avg_pause,
        offtopic_count=len(episodes),
        avg_offtopic_ms=avg_episode,
        assist_count=state.assist_count,
        llm_summarize=_stats(summarize_words, summarize_ms),
        llm_suggest=_stats(suggest_words, suggest_ms),
        detector_diagnostic=diagnostic,
    )


# ---------------------------------------------------------------------------
# Matched-pairs signed-rank test
# ---------------------------------------------------------------------------


class WilcoxonResult(NamedTuple):
    statistic: float  # W: sum of ranks of positive differences
    p_value: float
    n: int
    method: str  # "exact" | "approx"


def _midranks(values: Sequence[float]) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # 1-based average rank of the tied block
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _exact_p(ranks: Sequence[float], w_plus: float) -> float:
    # Exact null distribution of W+ over all 2^n sign assignments, computed
    # by subset-sum counting on doubled ranks (midranks may be half-integers).
    scaled = [int(round(2 * r)) for r in ranks]
    total = sum(scaled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in scaled:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    w2 = int(round(2 * w_plus))
    denom = float(2 ** len(ranks))
    p_le = sum(counts[: w2 + 1]) / denom
    p_ge = sum(counts[w2:]) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def _approx_p(abs_diffs: Sequence[float], ranks: Sequence[float], w_plus: float) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    tie_sum = 0.0
    seen: dict[float, int] = {}
    for d in abs_diffs:
        seen[d] = seen.get(d, 0) + 1
    for t in seen.values():
        tie_sum += t**3 - t
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_sum / 48.0
    if var <= 0:
        return 1.0
    z = (abs(w_plus - mu) - 0.5) / math.sqrt(var)  # continuity corrected
    if z < 0:
        z = 0.0
    return math.erfc(z / math.sqrt(2.0))


EXACT_MAX_N = 25


def wilcoxon_signed_rank(
    with_values: Sequence[float], without_values: Sequence[float]
) -> WilcoxonResult:
    """Two-sided matched-pairs signed-rank test.

    Differences are with - without; zero differences are dropped and tied
    magnitudes mid-ranked. Exact distribution up to n=25, normal
    approximation with tie and continuity correction beyond.
    """
    if len(with_values) != len(without_values):
        raise ValueError(
            f"paired samples differ in length: {len(with_values)} vs {len(without_values)}"
        )
    diffs = [a - b for a, b in zip(with_values, without_values) if a != b]
    n = len(diffs)
    if n < 1:
        raise NZeroError("all paired differences are zero")
    abs_diffs = [abs(d) for d in diffs]
    ranks = _midranks(abs_diffs)
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    if n <= EXACT_MAX_N:
        return WilcoxonResult(w_plus, _exact_p(ranks, w_plus), n, "exact")
    return WilcoxonResult(w_plus, _approx_p(abs_diffs, ranks, w_plus), n, "approx")
