"""Corpus loading and windowing.

The raw corpus format is three parallel text files: one line per
conversation in each. Dialogue lines hold utterances separated by an
``__eou__`` marker; act and emotion lines hold space-separated integer
codes, one per utterance. Speakers strictly alternate, so speaker names
are assigned positionally (A, B, A, ...).

Training samples are sliding windows: ``window`` consecutive turns of
context and the following turn as gold. A conversation with T turns
yields max(0, T - window) samples.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from statistics import mean

from .labels import Label, LabelKind, LabelSequence

EOU = "__eou__"

DEFAULT_ACT_CODES: dict[int, Label] = {
    1: Label.INFORM,
    2: Label.QUESTION,
    3: Label.DIRECTIVE,
    4: Label.COMMISSIVE,
}
DEFAULT_EMOTION_CODES: dict[int, Label] = {
    0: Label.NEUTRAL,
    1: Label.ANGER,
    2: Label.DISGUST,
    3: Label.FEAR,
    4: Label.HAPPINESS,
    5: Label.SADNESS,
    6: Label.SURPRISE,
}


class CorpusError(Exception):
    pass


class MalformedCorpus(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownLabelCode(CorpusError):
    def __init__(self, code: int, kind: LabelKind, line: int | None = None):
        self.code = code
        self.kind = kind
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown {kind.value} code {code}{where}")


class EmptySplit(CorpusError):
    pass


@dataclass(frozen=True)
class CodeTable:
    """Mapping from integer codes in the raw files to labels."""

    acts: Mapping[int, Label]
    emotions: Mapping[int, Label]

    def __post_init__(self):
        for code, label in self.acts.items():
            if label.kind is not LabelKind.ACT:
                raise ValueError(f"act code {code} maps to non-act {label}")
        for code, label in self.emotions.items():
            if label.kind is not LabelKind.EMOTION:
                raise ValueError(f"emotion code {code} maps to non-emotion {label}")

    @staticmethod
    def default() -> "CodeTable":
        return CodeTable(dict(DEFAULT_ACT_CODES), dict(DEFAULT_EMOTION_CODES))

    @classmethod
    def load(cls, path: str | Path) -> "CodeTable":
        """Read a table from a YAML or JSON file with keys acts/emotions."""
        import yaml

        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        acts = {int(c): Label.from_text(name) for c, name in raw["acts"].items()}
        emotions = {int(c): Label.from_text(name) for c, name in raw["emotions"].items()}
        return cls(acts, emotions)

    def act(self, code: int, line: int | None = None) -> Label:
        try:
            return self.acts[code]
        except KeyError:
            raise UnknownLabelCode(code, LabelKind.ACT, line) from None

    def emotion(self, code: int, line: int | None = None) -> Label:
        try:
            return self.emotions[code]
        except KeyError:
            raise UnknownLabelCode(code, LabelKind.EMOTION, line) from None

    def act_code(self, label: Label) -> int:
        return {v: k for k, v in self.acts.items()}[label]

    def emotion_code(self, label: Label) -> int:
        return {v: k for k, v in self.emotions.items()}[label]


@dataclass(frozen=True)
class DialogueTurn:
    speaker: str
    text: str
    act: Label
    emotion: Label

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")
        if self.act.kind is not LabelKind.ACT:
            raise ValueError(f"{self.act} is not an act")
        if self.emotion.kind is not LabelKind.EMOTION:
            raise ValueError(f"{self.emotion} is not an emotion")


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: tuple[DialogueTurn, ...]

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"conversation {self.id} has no turns")
        for i, turn in enumerate(self.turns):
            expected = "A" if i % 2 == 0 else "B"
            if turn.speaker != expected:
                raise ValueError(
                    f"conversation {self.id}: speaker at turn {i} is "
                    f"{turn.speaker!r}, expected {expected!r}"
                )


@dataclass(frozen=True)
class ContextSample:
    """A context window plus the gold continuation it should lead to."""

    conversation_id: str
    start: int
    context: tuple[DialogueTurn, ...]
    gold_labels: LabelSequence | None
    gold_response: str | None

    def __post_init__(self):
        if not self.context:
            raise ValueError("sample context must be non-empty")
        if self.gold_labels is not None:
            if not 1 <= len(self.gold_labels) <= 2:
                raise ValueError(f"gold label sequence has length {len(self.gold_labels)}")
            if self.gold_labels[0].kind is not LabelKind.ACT:
                raise ValueError("gold label sequence must start with an act")

    @property
    def ref(self) -> str:
        return f"{self.conversation_id}:{self.start}"


@dataclass(frozen=True)
class CorpusSplit:
    name: str
    samples: tuple[ContextSample, ...]


@dataclass(frozen=True)
class CorpusStats:
    n_samples: int
    mean_gold_length: float
    label_frequency: dict[Label, int]


def _lines(stream) -> list[str]:
    if isinstance(stream, str):
        return stream.splitlines()
    return [line.rstrip("\n") for line in stream]


def parse_corpus(
    dialogue_stream,
    act_stream,
    emotion_stream,
    table: CodeTable | None = None,
    id_prefix: str = "conv",
) -> list[Conversation]:
    """Parse the three parallel streams into conversations.

    Streams may be whole-file strings or iterables of lines. Lines blank
    in all three streams are skipped (trailing newlines produce those).
    """
    table = table or CodeTable.default()
    d_lines = _lines(dialogue_stream)
    a_lines = _lines(act_stream)
    e_lines = _lines(emotion_stream)
    if not (len(d_lines) == len(a_lines) == len(e_lines)):
        raise MalformedCorpus(
            "parallel streams have different line counts: "
            f"{len(d_lines)} dialogues, {len(a_lines)} act lines, {len(e_lines)} emotion lines"
        )

    conversations: list[Conversation] = []
    for i, (d_line, a_line, e_line) in enumerate(zip(d_lines, a_lines, e_lines), start=1):
        if not d_line.strip() and not a_line.strip() and not e_line.strip():
            continue
        pieces = d_line.split(EOU)
        if pieces and not pieces[-1].strip():
            pieces = pieces[:-1]
        texts = [p.strip() for p in pieces]
        if any(not t for t in texts):
            raise MalformedCorpus("empty utterance", line=i)
        act_codes = a_line.split()
        emotion_codes = e_line.split()
        if not (len(texts) == len(act_codes) == len(emotion_codes)):
            raise MalformedCorpus(
                f"{len(texts)} utterances but {len(act_codes)} act codes "
                f"and {len(emotion_codes)} emotion codes",
                line=i,
            )
        turns = []
        for j, (text, raw_act, raw_emotion) in enumerate(zip(texts, act_codes, emotion_codes)):
            try:
                act_code, emotion_code = int(raw_act), int(raw_emotion)
            except ValueError:
                raise MalformedCorpus(
                    f"non-integer label code at utterance {j}", line=i
                ) from None
            turns.append(
                DialogueTurn(
                    speaker="A" if j % 2 == 0 else "B",
                    text=text,
                    act=table.act(act_code, line=i),
                    emotion=table.emotion(emotion_code, line=i),
                )
            )
        conversations.append(Conversation(f"{id_prefix}-{i:05d}", tuple(turns)))
    return conversations


def write_corpus_streams(
    conversations: Iterable[Conversation], table: CodeTable | None = None
) -> tuple[str, str, str]:
    """Serialize conversations back to the three-stream format."""
    table = table or CodeTable.default()
    d_out, a_out, e_out = [], [], []
    for conv in conversations:
        d_out.append("".join(f"{t.text} {EOU} " for t in conv.turns).rstrip() + "\n")
        a_out.append(" ".join(str(table.act_code(t.act)) for t in conv.turns) + "\n")
        e_out.append(" ".join(str(table.emotion_code(t.emotion)) for t in conv.turns) + "\n")
    return "".join(d_out), "".join(a_out), "".join(e_out)


def turn_labels(turn: DialogueTurn, suppress_neutral: bool = True) -> LabelSequence:
    """The strategy sequence a turn realizes: its act, then its emotion.

    With neutral suppression (the default) a neutral turn contributes only
    its act, so sequences have length 1 or 2 and always start with the act.
    """
    if suppress_neutral and turn.emotion is Label.NEUTRAL:
        return (turn.act,)
    return (turn.act, turn.emotion)


def build_samples(
    conversations: Iterable[Conversation],
    window: int = 3,
    name: str = "samples",
    suppress_neutral: bool = True,
) -> CorpusSplit:
    """Slide a window over every conversation.

    Each position yields the window as context and the next turn as gold,
    so a conversation with T turns yields max(0, T - window) samples.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    samples = []
    for conv in conversations:
        for i in range(len(conv.turns) - window):
            gold = conv.turns[i + window]
            samples.append(
                ContextSample(
                    conversation_id=conv.id,
                    start=i,
                    context=tuple(conv.turns[i : i + window]),
                    gold_labels=turn_labels(gold, suppress_neutral),
                    gold_response=gold.text,
                )
            )
    return CorpusSplit(name, tuple(samples))


def corpus_stats(split: CorpusSplit) -> CorpusStats:
    if not split.samples:
        raise EmptySplit(f"split {split.name!r} has no samples")
    freq: dict[Label, int] = {}
    lengths = []
    for sample in split.samples:
        gold = sample.gold_labels or ()
        lengths.append(len(gold))
        for label in gold:
            freq[label] = freq.get(label, 0) + 1
    return CorpusStats(len(split.samples), mean(lengths), freq)


def format_context(turns: Iterable[DialogueTurn]) -> str:
    """Flatten a context to the single-line form prompts embed."""
    return " ".join(f"SPEAKER {t.speaker}: {t.text}" for t in turns)


# --- JSON-lines sample files -------------------------------------------------

SAMPLE_SCHEMA_VERSION = 1


def sample_to_dict(sample: ContextSample) -> dict:
    return {
        "v": SAMPLE_SCHEMA_VERSION,
        "conversation_id": sample.conversation_id,
        "start": sample.start,
        "context": [
            {
                "speaker": t.speaker,
                "text": t.text,
                "act": str(t.act),
                "emotion": str(t.emotion),
            }
            for t in sample.context
        ],
        "gold_labels": (
            None if sample.gold_labels is None else [str(l) for l in sample.gold_labels]
        ),
        "gold_response": sample.gold_response,
    }


def sample_from_dict(raw: Mapping) -> ContextSample:
    context = tuple(
        DialogueTurn(
            speaker=t["speaker"],
            text=t["text"],
            act=Label.from_text(t["act"]),
            emotion=Label.from_text(t["emotion"]),
        )
        for t in raw["context"]
    )
    gold = raw.get("gold_labels")
    return ContextSample(
        conversation_id=raw["conversation_id"],
        start=int(raw["start"]),
        context=context,
        gold_labels=None if gold is None else tuple(Label.from_text(l) for l in gold),
        gold_response=raw.get("gold_response"),
    )


def write_samples(split: CorpusSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in split.samples:
            fh.write(json.dumps(sample_to_dict(sample), ensure_ascii=False) + "\n")


def read_samples(path: str | Path, name: str | None = None) -> CorpusSplit:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                samples.append(sample_from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise MalformedCorpus(f"bad sample record: {exc}", line=i) from exc
    return CorpusSplit(name or Path(path).stem, tuple(samples))
