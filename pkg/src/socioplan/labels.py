"""The eleven socio-emotional strategy labels used across the workbench.

Four dialogue acts (what a turn does conversationally) and seven emotions
(what it displays affectively). Planners emit ordered sequences of these
labels, classifiers emit unordered sets.
"""

from __future__ import annotations

import enum


class LabelKind(enum.Enum):
    ACT = "act"
    EMOTION = "emotion"


class Label(enum.Enum):
    """One strategy label. ``Label.from_text(str(x)) is x`` for every member."""

    INFORM = "inform"
    QUESTION = "question"
    DIRECTIVE = "directive"
    COMMISSIVE = "commissive"
    NEUTRAL = "neutral"
    ANGER = "anger"
    DISGUST = "disgust"
    FEAR = "fear"
    HAPPINESS = "happiness"
    SADNESS = "sadness"
    SURPRISE = "surprise"

    def __str__(self) -> str:
        return self.value

    @property
    def kind(self) -> LabelKind:
        return LabelKind.ACT if self in _ACT_SET else LabelKind.EMOTION

    @classmethod
    def from_text(cls, text: str) -> "Label":
        try:
            return _BY_NAME[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown label {text!r}") from None


ACTS: tuple[Label, ...] = (
    Label.INFORM,
    Label.QUESTION,
    Label.DIRECTIVE,
    Label.COMMISSIVE,
)
EMOTIONS: tuple[Label, ...] = (
    Label.NEUTRAL,
    Label.ANGER,
    Label.DISGUST,
    Label.FEAR,
    Label.HAPPINESS,
    Label.SADNESS,
    Label.SURPRISE,
)
ALL_LABELS: tuple[Label, ...] = ACTS + EMOTIONS

_ACT_SET = frozenset(ACTS)
_BY_NAME = {label.value: label for label in ALL_LABELS}

# Ordered sequence for planning and edit-distance work, unordered set for
# classification and overlap metrics.
LabelSequence = tuple[Label, ...]
LabelSet = frozenset[Label]


def sequence_from_text(text: str) -> LabelSequence:
    """Parse a comma-separated listing such as ``"inform, happiness"``."""
    parts = [p for p in (piece.strip() for piece in text.split(",")) if p]
    return tuple(Label.from_text(p) for p in parts)


def sequence_to_text(labels) -> str:
    return ", ".join(str(label) for label in labels)
