"""Prompt template resources and the shared dialogue-history serializer.

Templates are versioned text files; builders substitute the input fields and
nothing else, so the wire bytes can be checked against the resources.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .types import Utterance

SUMMARY_TEMPLATE = "prompt_summary.txt"
SUGGESTION_TEMPLATE = "prompt_suggestion.txt"
OFFTOPIC_TEMPLATE = "prompt_offtopic.txt"


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return (
        resources.files("convoaid.resources").joinpath(name).read_text(encoding="utf-8")
    )


def serialize_history(history: tuple[Utterance, ...] | list[Utterance]) -> str:
    """All utterances as ``speaker: text`` lines, oldest first.

    Used verbatim by both the suggestion and off-topic builders.
    """
    return "\n".join(f"{u.speaker.value}: {u.text}" for u in history)


def build_summary_prompt(recent: Utterance, prev_keywords: tuple[str, ...] | list[str]) -> str:
    """Summary prompt: newest utterance plus the comma-joined previous terms.

    The previous-summary field is empty before the first applied update.
    """
    return load_template(SUMMARY_TEMPLATE).format(
        recent_utterance=recent.text,
        previous_summary=", ".join(prev_keywords),
    )


def build_suggestion_prompt(current: Utterance, history: tuple[Utterance, ...]) -> str:
    """Suggestion prompt over the full dialogue history (current included)."""
    return load_template(SUGGESTION_TEMPLATE).format(
        current_utterance=current.text,
        dialogue_history=serialize_history(history),
    )


def build_offtopic_prompt(current: Utterance, history: tuple[Utterance, ...]) -> str:
    """Off-topic prompt; same history serialization as suggestions."""
    return load_template(OFFTOPIC_TEMPLATE).format(
        current_utterance=current.text,
        dialogue_history=serialize_history(history),
    )
