"""Next-label planning: given a context window, propose the strategy
sequence the next turn should realize.

Three planner families share one interface: a remote model spoken to over
the backend wire protocol, a random baseline (one or two distinct labels,
second label drawn with probability 0.2), and an oracle that echoes the
gold sequence.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from statistics import mean
from typing import Protocol

from .corpus import ContextSample, CorpusSplit, EmptySplit, format_context
from .labels import ALL_LABELS, Label, LabelSequence
from .metrics import MetricReport, multilabel_prf, nls


class PlannerKind(Enum):
    REMOTE = "remote"
    RANDOM = "random"
    ORACLE = "oracle"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PlannedSequence:
    labels: LabelSequence
    source: PlannerKind
    viable: bool = True


class PlanningError(Exception):
    pass


class MissingGold(PlanningError):
    pass


class PlannerFailed(PlanningError):
    """A remote planner call failed; carries the index of the sample."""

    def __init__(self, sample_index: int, cause: Exception):
        self.sample_index = sample_index
        super().__init__(f"planner failed on sample {sample_index}: {cause}")


# Probability that the random baseline plans two labels instead of one,
# making its expected sequence length 1.2.
TWO_LABEL_RATE = 0.2


def plan_random(rng: random.Random) -> PlannedSequence:
    """Draw one label, or with probability 0.2 two distinct labels,
    uniformly from the eleven."""
    k = 2 if rng.random() < TWO_LABEL_RATE else 1
    labels = tuple(rng.sample(ALL_LABELS, k))
    return PlannedSequence(labels, PlannerKind.RANDOM)


def plan_oracle(sample: ContextSample) -> PlannedSequence:
    if not sample.gold_labels:
        raise MissingGold(f"sample {sample.ref} has no gold labels")
    return PlannedSequence(tuple(sample.gold_labels), PlannerKind.ORACLE)


LABEL_PROMPT_TEMPLATE = (
    "Predict the sequence of labels associated with the utterance that follows the given dialogue.\n"
    "We consider the following labels: 'inform', 'question', 'directive', 'commissive', "
    "'neutral', 'anger', 'disgust', 'fear', 'happiness', 'sadness' and 'surprise'. "
    "The answer must be one or a sequence of multiple labels from this list.\n"
    "\n"
    "Here are a few examples,\n"
    "Dialogue: Good morning, sir. Is there a bank near here ?\n"
    "Labels: 'inform'.\n"
    "Dialogue: Is it far ?\n"
    "Labels:'inform'\n"
    "Dialogue: No, It's only about five minutes walk.\n"
    "Labels: 'inform', 'happiness'.\n"
    "\n"
    "What labels are associated with the utterance following this dialogue:\n"
    "Dialogue: "
)


def build_label_prompt(context) -> str:
    """Few-shot prompt asking a completion model for the next turn's labels."""
    return LABEL_PROMPT_TEMPLATE + format_context(context)


_WORD = re.compile(r"[a-z]+")
_STRICT_SHAPE = re.compile(r"^Labels:\s*(['`][a-z]+'\s*,?\s*)+\.?$", re.IGNORECASE)
_QUOTED = re.compile(r"['`]([a-z]+)'", re.IGNORECASE)


def parse_label_response(raw: str, strict: bool = False) -> PlannedSequence:
    """Read a planner completion back into labels. Total: never raises.

    Lenient mode scans for known label names anywhere in the text, keeps
    first occurrences in order, and drops everything else; an answer with
    no known label (including the literal "None") is flagged non-viable.
    Strict mode additionally requires the answer to be a single
    "Labels: ..." line of quoted label names.
    """
    text = raw.strip()
    if strict:
        if not _STRICT_SHAPE.match(text):
            return PlannedSequence((), PlannerKind.REMOTE, viable=False)
        tokens = [m.group(1).lower() for m in _QUOTED.finditer(text)]
    else:
        tokens = [m.group(0) for m in _WORD.finditer(text.lower())]

    seen: list[Label] = []
    known = {str(label): label for label in ALL_LABELS}
    for token in tokens:
        label = known.get(token)
        if label is not None and label not in seen:
            seen.append(label)
    return PlannedSequence(tuple(seen), PlannerKind.REMOTE, viable=bool(seen))


class Planner(Protocol):
    sequence_aware: bool

    def plan(self, sample: ContextSample) -> PlannedSequence: ...


class RandomPlanner:
    sequence_aware = True

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def plan(self, sample: ContextSample) -> PlannedSequence:
        return plan_random(self._rng)


class OraclePlanner:
    sequence_aware = True

    def plan(self, sample: ContextSample) -> PlannedSequence:
        return plan_oracle(sample)


class RemotePlanner:
    """Plans by asking a label-prediction backend over the wire protocol."""

    def __init__(self, backend, sequence_aware: bool = True):
        self._backend = backend
        self.sequence_aware = sequence_aware

    def plan(self, sample: ContextSample) -> PlannedSequence:
        names = self._backend.predict_labels(sample.context)
        if names is None:
            return PlannedSequence((), PlannerKind.REMOTE, viable=False)
        seen: list[Label] = []
        for name in names:
            try:
                label = Label.from_text(name)
            except ValueError:
                continue
            if label not in seen:
                seen.append(label)
        return PlannedSequence(tuple(seen), PlannerKind.REMOTE, viable=bool(seen))


def evaluate_planner(planner: Planner, split: CorpusSplit) -> MetricReport:
    """Run a planner over a split and score it against the golds.

    Non-viable plans count as empty predictions. The oracle planner is a
    fixed point: every similarity metric comes back 1.0.
    """
    from .backends import BackendError

    if not split.samples:
        raise EmptySplit(f"split {split.name!r} has no samples")
    golds, preds, nls_values, lengths = [], [], [], []
    for i, sample in enumerate(split.samples):
        if not sample.gold_labels:
            raise MissingGold(f"sample {sample.ref} has no gold labels")
        try:
            planned = planner.plan(sample)
        except BackendError as exc:
            raise PlannerFailed(i, exc) from exc
        labels = planned.labels if planned.viable else ()
        golds.append(frozenset(sample.gold_labels))
        preds.append(frozenset(labels))
        lengths.append(len(labels))
        if planner.sequence_aware:
            nls_values.append(nls(labels, sample.gold_labels))

    report = multilabel_prf(golds, preds)
    return replace(
        report,
        nls=mean(nls_values) if nls_values else None,
        mean_len=mean(lengths),
    )
