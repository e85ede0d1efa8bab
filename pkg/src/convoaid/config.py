"""Engine configuration: timing constants, ramp parameters, mock latencies.

All knobs that affect session behaviour live here so that a replay is a pure
function of (transcript, config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .types import FeatureConfig


@dataclass(frozen=True)
class MockLatencies:
    """Synthetic round-trip times per channel, milliseconds.

    Summarize/suggest defaults mirror the measured means of the real system;
    set everything to 0 for fast test suites.
    """

    summarize_ms: int = 1250
    suggest_ms: int = 1950
    offtopic_ms: int = 800
    jitter_ms: int = 0  # uniform +/- jitter drawn from the session seed


@dataclass(frozen=True)
class EngineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    panel_fade_ms: int = 5000
    suggestion_cadence_ms: int = 1000
    suggestion_cancel_after_ms: int = 3000
    tick_ms: int = 50
    offtopic_ramp_k: int = 3
    dim_opacity: float = 0.35
    pause_threshold_ms: int = 2000
    backend_timeout_ms: int = 10_000
    mock_latencies: MockLatencies = field(default_factory=MockLatencies)
    seed: int = 0

    def with_seed(self, seed: int) -> "EngineConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "features": self.features.to_dict(),
            "panel_fade_ms": self.panel_fade_ms,
            "suggestion_cadence_ms": self.suggestion_cadence_ms,
            "suggestion_cancel_after_ms": self.suggestion_cancel_after_ms,
            "tick_ms": self.tick_ms,
            "offtopic_ramp_k": self.offtopic_ramp_k,
            "dim_opacity": self.dim_opacity,
            "pause_threshold_ms": self.pause_threshold_ms,
            "backend_timeout_ms": self.backend_timeout_ms,
            "mock_latencies": {
                "summarize_ms": self.mock_latencies.summarize_ms,
                "suggest_ms": self.mock_latencies.suggest_ms,
                "offtopic_ms": self.mock_latencies.offtopic_ms,
                "jitter_ms": self.mock_latencies.jitter_ms,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        kwargs: dict = {}
        if "features" in d:
            kwargs["features"] = FeatureConfig.from_dict(d["features"])
        if "mock_latencies" in d:
            ml = d["mock_latencies"]
            kwargs["mock_latencies"] = MockLatencies(
                summarize_ms=int(ml.get("summarize_ms", 1250)),
                suggest_ms=int(ml.get("suggest_ms", 1950)),
                offtopic_ms=int(ml.get("offtopic_ms", 800)),
                jitter_ms=int(ml.get("jitter_ms", 0)),
            )
        for key in (
            "panel_fade_ms",
            "suggestion_cadence_ms",
            "suggestion_cancel_after_ms",
            "tick_ms",
            "offtopic_ramp_k",
            "pause_threshold_ms",
            "backend_timeout_ms",
            "seed",
        ):
            if key in d:
                kwargs[key] = int(d[key])
        if "dim_opacity" in d:
            kwargs["dim_opacity"] = float(d["dim_opacity"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
