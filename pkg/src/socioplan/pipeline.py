"""Candidate generation and label-guided reranking.

Under label conditioning the pipeline generates a pool of candidate
responses, classifies each candidate's realized labels, and picks the
candidate whose canonical label sequence is closest (normalized
Levenshtein similarity) to the planned sequence. Without conditioning it
simply keeps the first candidate.

Modes: NO_CD (no conditioning), CD_PRED (condition on a planner's
prediction, falling back to NO_CD selection when the planner yields
nothing viable), CD_GT (condition on the gold sequence).
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .backends import BackendError, Backends, ClassifierBackend
from .corpus import ContextSample, DialogueTurn, format_context
from .labels import ALL_LABELS, Label, LabelSequence, LabelSet, sequence_to_text
from .metrics import nls
from .planning import PlannedSequence, Planner, PlannerKind, plan_oracle


class ConditioningMode(Enum):
    NO_CD = "nocd"
    CD_PRED = "cd-pred"
    CD_GT = "cd-gt"

    def __str__(self) -> str:
        return self.value


class PipelineError(Exception):
    pass


class EmptyCandidateList(PipelineError):
    pass


class ClassifierUnavailable(PipelineError):
    pass


class PlannerRequired(PipelineError):
    pass


@dataclass
class Candidate:
    index: int
    text: str
    labels: LabelSet = frozenset()
    confidences: dict[Label, float] = field(default_factory=dict)
    low_confidence: bool = False
    nls: float | None = None


@dataclass(frozen=True)
class GenerationConfig:
    model: str = "mock"
    approach: str = "reranking"
    mode: ConditioningMode = ConditioningMode.NO_CD
    n_candidates: int = 10
    classifier_threshold: float = 0.7
    # NO_CD normally generates a single response; set this to reuse the
    # full pool and keep its first candidate instead.
    nocd_from_pool: bool = False

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not 0.0 < self.classifier_threshold <= 1.0:
            raise ValueError("classifier_threshold must be in (0, 1]")


@dataclass
class PipelineRunRecord:
    model: str
    approach: str
    sample_ref: str
    mode: ConditioningMode
    planned: PlannedSequence | None
    candidates: list[Candidate]
    selected_index: int | None
    selected_text: str | None
    fallback_nocd: bool = False
    unparsable: bool = False
    failed: bool = False
    failure: str | None = None


def canonical_sequence(labels: LabelSet) -> LabelSequence:
    """Order a label set for sequence comparison: acts first, then
    emotions, each in their fixed corpus order."""
    return tuple(label for label in ALL_LABELS if label in labels)


@dataclass(frozen=True)
class ClassificationResult:
    labels: LabelSet
    confidences: dict[Label, float]
    low_confidence: bool = False


def classify_labels(
    text: str, threshold: float, classifier: ClassifierBackend
) -> ClassificationResult:
    """Labels whose confidence clears the threshold; when none does, the
    single best label is kept and the result flagged low-confidence."""
    try:
        confidences = classifier.classify(text)
    except BackendError as exc:
        raise ClassifierUnavailable(str(exc)) from exc
    kept = frozenset(label for label, score in confidences.items() if score >= threshold)
    if kept:
        return ClassificationResult(kept, confidences)
    best = max(confidences, key=lambda label: (confidences[label], -ALL_LABELS.index(label)))
    return ClassificationResult(frozenset([best]), confidences, low_confidence=True)


def rerank(candidates: Sequence[Candidate], expected: LabelSequence) -> int:
    """Score every candidate's canonical sequence against the expected one
    and return the position of the best; ties break toward the earliest."""
    if not candidates:
        raise EmptyCandidateList("nothing to rerank")
    best_pos = 0
    best_score = -1.0
    for pos, candidate in enumerate(candidates):
        candidate.nls = nls(canonical_sequence(candidate.labels), expected)
        if candidate.nls > best_score:
            best_pos, best_score = pos, candidate.nls
    return best_pos


# --- prompt templates -----------------------------------------------------------

NOCD_PROMPT_TEMPLATE = (
    "Generate the response following the given context. For example:\n"
    "A: Do you like some soup?\n"
    "B: Yes, but I don't know what soup you have\n"
    "A: We have beef soup and tomato soup\n"
    "Response: Good. I prefer beef soup .\n"
    "\n"
    "A: Can I take your order now, Madam?\n"
    "B: Yes, what would you recommend?\n"
    "A: I'm happy to recommend the fish, It tastes delicious, and it is today's special. "
    "Our chef is from the coast, and loves seafood. Today's special is actually his favorite dish. "
    "so I'm sure it is a\n"
    "Response: It does sound wonderful, maybe I'll try it .\n"
    "\n"
    "Generate the response following the following dialogue: "
)


def build_nocd_prompt(context: Sequence[DialogueTurn]) -> str:
    """Plain single-response prompt with two worked examples."""
    return NOCD_PROMPT_TEMPLATE + format_context(context)


def build_multi_prompt(context: Sequence[DialogueTurn], n: int) -> str:
    """Prompt for a numbered pool of n candidate responses."""
    return (
        "Generate " + str(n) + " responses following this dialogue: " + format_context(context) + "\n"
        "Number the generated sequences from 1 to " + str(n) + "\n"
        "Generated sequences:\n"
        "1: "
    )


def build_pb_prompt(context: Sequence[DialogueTurn], labels: Iterable[Label]) -> str:
    """Prompt asking for one response written in the given tone."""
    return (
        "Generate the response following the given context : " + format_context(context) + "\n"
        "The tone of the response must be " + sequence_to_text(labels) + "\n"
        "Response: "
    )


_MULTI_MARKER = re.compile(r"^\s*(\d+)\s*:\s*", re.MULTILINE)


def parse_multi_response(raw: str, n: int) -> list[str | None]:
    """Split a numbered completion into its candidate slots.

    The returned list always has n entries; entries whose marker is
    missing, out of range, or followed by nothing stay None so that
    surviving candidates keep their original indices.
    """
    slots: list[str | None] = [None] * n
    markers = list(_MULTI_MARKER.finditer(raw))
    for pos, marker in enumerate(markers):
        number = int(marker.group(1))
        if not 1 <= number <= n:
            continue
        end = markers[pos + 1].start() if pos + 1 < len(markers) else len(raw)
        text = raw[marker.end() : end].strip()
        if text and slots[number - 1] is None:
            slots[number - 1] = text
    return slots


# --- the run itself --------------------------------------------------------------


def run_context(
    sample: ContextSample,
    config: GenerationConfig,
    backends: Backends,
    planner: Planner | None = None,
) -> PipelineRunRecord:
    """Run one context through generation (and, under conditioning,
    classification and reranking). Backend failures do not raise; they
    come back as a failed record with the cause attached.
    """
    record = PipelineRunRecord(
        model=config.model,
        approach=config.approach,
        sample_ref=sample.ref,
        mode=config.mode,
        planned=None,
        candidates=[],
        selected_index=None,
        selected_text=None,
    )

    expected: LabelSequence | None = None
    if config.mode is ConditioningMode.CD_GT:
        record.planned = plan_oracle(sample)
        expected = record.planned.labels
    elif config.mode is ConditioningMode.CD_PRED:
        if planner is None:
            raise PlannerRequired("CD_PRED needs a planner")
        try:
            record.planned = planner.plan(sample)
        except BackendError as exc:
            record.failed = True
            record.failure = f"planner: {exc}"
            return record
        if record.planned.viable:
            expected = record.planned.labels
        else:
            record.fallback_nocd = True

    conditioned = expected is not None
    if config.mode is ConditioningMode.NO_CD and not config.nocd_from_pool:
        n = 1
    else:
        n = config.n_candidates

    try:
        texts = backends.generator.generate(
            sample.context,
            n,
            str(config.mode),
            labels=expected,
        )
    except BackendError as exc:
        record.failed = True
        record.failure = f"generator: {exc}"
        return record

    record.candidates = [
        Candidate(index=i, text=text) for i, text in enumerate(texts) if text is not None
    ]
    if not record.candidates:
        record.unparsable = True
        return record

    if conditioned:
        try:
            for candidate in record.candidates:
                result = classify_labels(
                    candidate.text, config.classifier_threshold, backends.classifier
                )
                candidate.labels = result.labels
                candidate.confidences = result.confidences
                candidate.low_confidence = result.low_confidence
        except ClassifierUnavailable as exc:
            record.failed = True
            record.failure = f"classifier: {exc}"
            return record
        record.selected_index = rerank(record.candidates, expected)
    else:
        record.selected_index = 0
    record.selected_text = record.candidates[record.selected_index].text
    return record


def run_split(
    samples: Iterable[ContextSample],
    config: GenerationConfig,
    backends: Backends,
    planner: Planner | None = None,
    jobs: int = 1,
) -> list[PipelineRunRecord]:
    """run_context over many samples, optionally with worker threads.

    Records come back in sample order regardless of jobs, so runs with a
    deterministic backend are reproducible either way.
    """
    samples = list(samples)
    if jobs <= 1:
        return [run_context(s, config, backends, planner) for s in samples]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: run_context(s, config, backends, planner), samples))


# --- record files ----------------------------------------------------------------

RECORD_SCHEMA_VERSION = 1


def record_to_dict(record: PipelineRunRecord) -> dict:
    return {
        "v": RECORD_SCHEMA_VERSION,
        "model": record.model,
        "approach": record.approach,
        "sample_ref": record.sample_ref,
        "mode": str(record.mode),
        "planned": (
            None
            if record.planned is None
            else {
                "labels": [str(l) for l in record.planned.labels],
                "source": str(record.planned.source),
                "viable": record.planned.viable,
            }
        ),
        "candidates": [
            {
                "index": c.index,
                "text": c.text,
                "labels": sorted(str(l) for l in c.labels),
                "confidences": {str(l): s for l, s in sorted(c.confidences.items(), key=lambda kv: str(kv[0]))},
                "low_confidence": c.low_confidence,
                "nls": c.nls,
            }
            for c in record.candidates
        ],
        "selected_index": record.selected_index,
        "selected_text": record.selected_text,
        "fallback_nocd": record.fallback_nocd,
        "unparsable": record.unparsable,
        "failed": record.failed,
        "failure": record.failure,
    }


def record_from_dict(raw: Mapping) -> PipelineRunRecord:
    planned = raw.get("planned")
    return PipelineRunRecord(
        model=raw["model"],
        approach=raw.get("approach", "reranking"),
        sample_ref=raw["sample_ref"],
        mode=ConditioningMode(raw["mode"]),
        planned=(
            None
            if planned is None
            else PlannedSequence(
                tuple(Label.from_text(l) for l in planned["labels"]),
                PlannerKind(planned["source"]),
                planned.get("viable", True),
            )
        ),
        candidates=[
            Candidate(
                index=c["index"],
                text=c["text"],
                labels=frozenset(Label.from_text(l) for l in c.get("labels", [])),
                confidences={
                    Label.from_text(l): float(s) for l, s in c.get("confidences", {}).items()
                },
                low_confidence=c.get("low_confidence", False),
                nls=c.get("nls"),
            )
            for c in raw.get("candidates", [])
        ],
        selected_index=raw.get("selected_index"),
        selected_text=raw.get("selected_text"),
        fallback_nocd=raw.get("fallback_nocd", False),
        unparsable=raw.get("unparsable", False),
        failed=raw.get("failed", False),
        failure=raw.get("failure"),
    )


def write_records(records: Iterable[PipelineRunRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[PipelineRunRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records
