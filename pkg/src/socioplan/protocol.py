"""The three-step human evaluation protocol, model-blind by construction.

Step 1: annotators keep or eliminate every response in a deduplicated,
shuffled pool. Step 2: they pick their top 3 among what they kept.
Step 3: every annotator rates each response that made it into the union
of top-3 picks, tagging its dialogue acts and answering a questionnaire
whose questions group into logical, emotional and social axes.

Scores per model key:

  filter(m)  mean over annotators of (contexts where m's entry was kept)
             / (contexts the annotator judged), as a percentage
  top3(m)    same with "kept" replaced by "picked into the top 3"
  socemo(m)  100 / (N * k) * sum of response scores over annotator-context
             pairs where m's entry reached the step-3 pool and was rated;
             a response score is the mean of its three axis scores, an
             axis score the mean of its normalized question values

Responses with identical normalized text share one pool entry, so every
key producing that text receives identical scores by construction.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence, Set
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean

from .labels import Label, LabelKind
from .metrics import AnnotationMatrix, InsufficientData, jaccard_distance, krippendorff_alpha, pairwise_list_jaccard


class ProtocolError(Exception):
    pass


class NoRecords(ProtocolError):
    pass


class NoJudgments(ProtocolError):
    pass


class MissingRating(ProtocolError):
    pass


class TagError(ProtocolError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class UnbalancedTags(TagError):
    pass


class UnknownTag(TagError):
    def __init__(self, tag: str, offset: int):
        self.tag = tag
        super().__init__(f"unknown tag <{tag}>", offset)


# --- model keys and pools -------------------------------------------------------


@dataclass(frozen=True, order=True)
class ModelKey:
    """What produced a response: generator model, conditioning mode, and
    whether selection was rerank-based or prompt-based."""

    model: str
    mode: str
    approach: str

    def to_dict(self) -> dict:
        return {"model": self.model, "mode": self.mode, "approach": self.approach}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ModelKey":
        return cls(raw["model"], raw["mode"], raw["approach"])

    def __str__(self) -> str:
        return f"{self.model}/{self.mode}/{self.approach}"


REFERENCE_KEY = ModelKey("reference", "-", "reference")


@dataclass(frozen=True)
class PoolEntry:
    response_id: str
    text: str
    producers: frozenset[ModelKey]


@dataclass(frozen=True)
class ResponsePool:
    context_ref: str
    context_turns: tuple[tuple[str, str], ...]  # (speaker, text) pairs
    entries: tuple[PoolEntry, ...]

    def entry_for(self, key: ModelKey) -> PoolEntry | None:
        for entry in self.entries:
            if key in entry.producers:
                return entry
        return None

    def entry_by_id(self, response_id: str) -> PoolEntry | None:
        for entry in self.entries:
            if entry.response_id == response_id:
                return entry
        return None


def normalize_response(text: str) -> str:
    """Dedup identity: trim and collapse internal whitespace runs.
    Case is preserved."""
    return " ".join(text.split())


def _response_id(salt: str, context_ref: str, text: str) -> str:
    digest = hashlib.sha1(f"{salt}|{context_ref}|{text}".encode("utf-8")).hexdigest()
    return f"r{digest[:8]}"


def dedup_pool(
    records: Sequence,
    reference_text: str,
    context_ref: str | None = None,
    context_turns: Sequence[tuple[str, str]] = (),
    salt: str = "",
) -> ResponsePool:
    """Collapse one context's selected responses plus the corpus reference
    into anonymous pool entries.

    Entries keep first-seen order; response ids are content hashes, so
    they reveal nothing about which model produced what.
    """
    if not records and not reference_text:
        raise NoRecords("nothing to pool")
    contributing = [r for r in records if r.selected_text is not None]
    refs = {r.sample_ref for r in records}
    if context_ref is None:
        if len(refs) != 1:
            raise ProtocolError(f"records span several contexts: {sorted(refs)}")
        context_ref = next(iter(refs))
    elif refs - {context_ref}:
        raise ProtocolError(f"records for {sorted(refs - {context_ref})} mixed into {context_ref}")

    producers_by_text: dict[str, set[ModelKey]] = {}
    order: list[str] = []
    seen_keys: set[ModelKey] = set()
    for record in contributing:
        key = ModelKey(record.model, str(record.mode), record.approach)
        if key in seen_keys:
            raise ProtocolError(f"duplicate run record for {key} on {context_ref}")
        seen_keys.add(key)
        text = normalize_response(record.selected_text)
        if text not in producers_by_text:
            producers_by_text[text] = set()
            order.append(text)
        producers_by_text[text].add(key)

    reference = normalize_response(reference_text)
    if not reference:
        raise ProtocolError(f"empty reference response for {context_ref}")
    if reference not in producers_by_text:
        producers_by_text[reference] = set()
        order.append(reference)
    producers_by_text[reference].add(REFERENCE_KEY)

    entries = tuple(
        PoolEntry(
            response_id=_response_id(salt, context_ref, text),
            text=text,
            producers=frozenset(producers_by_text[text]),
        )
        for text in order
    )
    return ResponsePool(context_ref, tuple(tuple(t) for t in context_turns), entries)


def shuffle_pool(pool: ResponsePool, seed: int) -> tuple[PoolEntry, ...]:
    """Deterministic display order for one (annotator, context) screen."""
    entries = list(pool.entries)
    random.Random(seed).shuffle(entries)
    return tuple(entries)


# --- judgments -------------------------------------------------------------------


@dataclass(frozen=True)
class Step1Judgment:
    annotator: str
    context_ref: str
    kept: Mapping[str, bool]
    # optional per-response criteria flags: response_id -> (consistent, specific)
    flags: Mapping[str, tuple[bool, bool]] = field(default_factory=dict)

    def kept_ids(self) -> frozenset[str]:
        return frozenset(rid for rid, keep in self.kept.items() if keep)


@dataclass(frozen=True)
class Step2Selection:
    annotator: str
    context_ref: str
    top3: tuple[str, str, str]

    def __post_init__(self):
        if len(set(self.top3)) != 3:
            raise ValueError("top3 must hold three distinct response ids")


@dataclass(frozen=True)
class Step3Rating:
    annotator: str
    context_ref: str
    response_id: str
    tagged_text: str
    ratings: Mapping[str, int]


def union_top3(selections: Iterable[Step2Selection]) -> frozenset[str]:
    return frozenset(rid for sel in selections for rid in sel.top3)


# --- dialogue-act tagging ---------------------------------------------------------

TAG_LETTERS: dict[str, Label] = {
    "I": Label.INFORM,
    "Q": Label.QUESTION,
    "D": Label.DIRECTIVE,
    "C": Label.COMMISSIVE,
}
_LETTER_BY_ACT = {label: letter for letter, label in TAG_LETTERS.items()}
_OPEN_TAG = re.compile(r"<([A-Za-z]+)>")


@dataclass(frozen=True)
class Segment:
    act: Label
    text: str

    def __post_init__(self):
        if self.act.kind is not LabelKind.ACT:
            raise ValueError(f"{self.act} cannot tag a segment")
        if "<" in self.text or ">" in self.text:
            raise ValueError("segment text may not contain angle brackets")
        if self.text != self.text.strip():
            raise ValueError("segment text must be stripped")


def parse_tagged_response(text: str) -> tuple[Segment, ...]:
    """Parse an act-tagged response such as ``<I>Sure.</I> <Q>When?</Q>``.

    Tags may not nest; whitespace between segments is ignored; anything
    else outside a tag is an error. Offsets in errors are byte positions
    into the input.
    """
    segments: list[Segment] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        if text[pos] != "<":
            raise UnbalancedTags("text outside tags", pos)
        match = _OPEN_TAG.match(text, pos)
        if not match:
            raise UnbalancedTags("stray closing tag or malformed tag", pos)
        letter = match.group(1)
        if letter not in TAG_LETTERS:
            raise UnknownTag(letter, pos)
        closing = f"</{letter}>"
        close_at = text.find(closing, match.end())
        if close_at == -1:
            raise UnbalancedTags(f"missing {closing}", len(text))
        inner = text[match.end() : close_at]
        stray = inner.find("<")
        if stray != -1:
            raise UnbalancedTags("nested or stray tag", match.end() + stray)
        segments.append(Segment(TAG_LETTERS[letter], inner.strip()))
        pos = close_at + len(closing)
    return tuple(segments)


def serialize_tagged(segments: Iterable[Segment]) -> str:
    return "".join(
        f"<{_LETTER_BY_ACT[seg.act]}>{seg.text}</{_LETTER_BY_ACT[seg.act]}>"
        for seg in segments
    )


# --- questionnaire ----------------------------------------------------------------


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    axis: str
    scale_min: int = 1
    scale_max: int = 5

    def __post_init__(self):
        if self.scale_max <= self.scale_min:
            raise ValueError(f"question {self.id}: empty scale")

    def normalize(self, value: int) -> float:
        if not self.scale_min <= value <= self.scale_max:
            raise ValueError(
                f"question {self.id}: value {value} outside "
                f"[{self.scale_min}, {self.scale_max}]"
            )
        return (value - self.scale_min) / (self.scale_max - self.scale_min)


@dataclass(frozen=True)
class QuestionnaireSpec:
    questions: tuple[Question, ...]

    def __post_init__(self):
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate question ids")
        if not ids:
            raise ValueError("questionnaire needs at least one question")

    @property
    def axes(self) -> tuple[str, ...]:
        seen: list[str] = []
        for q in self.questions:
            if q.axis not in seen:
                seen.append(q.axis)
        return tuple(seen)

    def by_axis(self, axis: str) -> tuple[Question, ...]:
        return tuple(q for q in self.questions if q.axis == axis)

    def question(self, qid: str) -> Question:
        for q in self.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)

    def rating_errors(self, ratings: Mapping[str, int]) -> list[str]:
        """Human-readable problems with a ratings map; empty when valid."""
        problems = []
        for q in self.questions:
            if q.id not in ratings:
                problems.append(f"missing answer for {q.id}")
                continue
            value = ratings[q.id]
            if not isinstance(value, int) or isinstance(value, bool):
                problems.append(f"{q.id}: answer must be an integer")
            elif not q.scale_min <= value <= q.scale_max:
                problems.append(
                    f"{q.id}: {value} outside [{q.scale_min}, {q.scale_max}]"
                )
        known = {q.id for q in self.questions}
        for qid in ratings:
            if qid not in known:
                problems.append(f"unknown question {qid}")
        return problems

    def to_dict(self) -> dict:
        return {
            "questions": [
                {
                    "id": q.id,
                    "text": q.text,
                    "axis": q.axis,
                    "scale_min": q.scale_min,
                    "scale_max": q.scale_max,
                }
                for q in self.questions
            ]
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "QuestionnaireSpec":
        return cls(
            tuple(
                Question(
                    id=q["id"],
                    text=q["text"],
                    axis=q["axis"],
                    scale_min=int(q.get("scale_min", 1)),
                    scale_max=int(q.get("scale_max", 5)),
                )
                for q in raw["questions"]
            )
        )


DEFAULT_QUESTIONNAIRE = QuestionnaireSpec(
    (
        Question("usefulness", "Does the response move the conversation forward in a useful way?", "logical"),
        Question("fluency", "Is the response written in fluent, natural language?", "logical"),
        Question("style_consistency", "Do the wording and register fit the rest of the conversation?", "logical"),
        Question("emotional_tone_adequacy", "Is the emotional tone of the response appropriate here?", "emotional"),
        Question("dialogue_strategy_adequacy", "Are the dialogue acts of the response appropriate here?", "social"),
        Question("role_consistency", "Does the response stay within the speaker's role in the conversation?", "social"),
    )
)

FLUENCY_QUESTION_ID = "fluency"


def load_questionnaire(path: str | Path) -> QuestionnaireSpec:
    import yaml

    return QuestionnaireSpec.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))


# --- scoring ----------------------------------------------------------------------


def _keys_from_pools(pools: Mapping[str, ResponsePool]) -> tuple[ModelKey, ...]:
    keys = {key for pool in pools.values() for entry in pool.entries for key in entry.producers}
    return tuple(sorted(keys))


def _membership_score(
    judged: Mapping[str, int], hits: Mapping[str, Counter], keys: Sequence[ModelKey]
) -> dict[ModelKey, float]:
    annotators = sorted(a for a, n in judged.items() if n > 0)
    scores = {}
    for key in keys:
        rates = [hits[a][key] / judged[a] for a in annotators]
        scores[key] = 100.0 * mean(rates)
    return scores


def score_filter(
    judgments: Iterable[Step1Judgment],
    pools: Mapping[str, ResponsePool],
    keys: Sequence[ModelKey] | None = None,
) -> dict[ModelKey, float]:
    """Survival rate of each key's responses through step 1.

    Each annotator contributes the fraction of their judged contexts in
    which the entry carrying the key was kept; the score is the mean of
    those fractions, as a percentage.
    """
    judgments = list(judgments)
    if not judgments:
        raise NoJudgments("no step-1 judgments")
    if keys is None:
        keys = _keys_from_pools(pools)
    judged: Counter = Counter()
    hits: dict[str, Counter] = {}
    for judgment in judgments:
        pool = pools.get(judgment.context_ref)
        if pool is None:
            raise ProtocolError(f"no pool for judged context {judgment.context_ref}")
        judged[judgment.annotator] += 1
        counter = hits.setdefault(judgment.annotator, Counter())
        for entry in pool.entries:
            if judgment.kept.get(entry.response_id, False):
                for key in entry.producers:
                    counter[key] += 1
    return _membership_score(judged, hits, keys)


def score_top3(
    selections: Iterable[Step2Selection],
    pools: Mapping[str, ResponsePool],
    keys: Sequence[ModelKey] | None = None,
) -> dict[ModelKey, float]:
    """Like score_filter, counting top-3 membership instead of survival."""
    selections = list(selections)
    if not selections:
        raise NoJudgments("no step-2 selections")
    if keys is None:
        keys = _keys_from_pools(pools)
    judged: Counter = Counter()
    hits: dict[str, Counter] = {}
    for selection in selections:
        pool = pools.get(selection.context_ref)
        if pool is None:
            raise ProtocolError(f"no pool for judged context {selection.context_ref}")
        judged[selection.annotator] += 1
        counter = hits.setdefault(selection.annotator, Counter())
        chosen = set(selection.top3)
        for entry in pool.entries:
            if entry.response_id in chosen:
                for key in entry.producers:
                    counter[key] += 1
    return _membership_score(judged, hits, keys)


@dataclass(frozen=True)
class Step3Scores:
    socemo: float
    logical: float | None
    emotional: float | None
    social: float | None
    weighted_fluency: float | None
    n_rated: int = 0


def _rating_scores(
    rating: Step3Rating, questionnaire: QuestionnaireSpec
) -> tuple[float, dict[str, float], float | None]:
    """(response score, per-axis scores, normalized fluency) of one rating."""
    axis_scores: dict[str, float] = {}
    for axis in questionnaire.axes:
        values = [
            q.normalize(rating.ratings[q.id])
            for q in questionnaire.by_axis(axis)
            if q.id in rating.ratings
        ]
        if values:
            axis_scores[axis] = mean(values)
    response_score = mean(axis_scores.values()) if axis_scores else 0.0
    fluency = None
    if FLUENCY_QUESTION_ID in rating.ratings:
        try:
            question = questionnaire.question(FLUENCY_QUESTION_ID)
        except KeyError:
            question = None
        if question is not None:
            fluency = question.normalize(rating.ratings[FLUENCY_QUESTION_ID])
    return response_score, axis_scores, fluency


def validate_step3_complete(
    ratings: Iterable[Step3Rating],
    step3_pools: Mapping[str, Set],
    annotators: Sequence[str],
) -> None:
    """Raise MissingRating unless every pooled response was rated by every
    annotator."""
    have = {(r.annotator, r.context_ref, r.response_id) for r in ratings}
    for context_ref, pool in step3_pools.items():
        for annotator in annotators:
            for response_id in pool:
                if (annotator, context_ref, response_id) not in have:
                    raise MissingRating(
                        f"{annotator} has not rated {response_id} in {context_ref}"
                    )


def score_step3(
    ratings: Iterable[Step3Rating],
    step3_pools: Mapping[str, Set],
    pools: Mapping[str, ResponsePool],
    questionnaire: QuestionnaireSpec,
    annotators: Sequence[str],
    keys: Sequence[ModelKey] | None = None,
    n_contexts: int | None = None,
    strict: bool = False,
) -> dict[ModelKey, Step3Scores]:
    """Questionnaire scores per key over the step-3 pools.

    socemo and weighted_fluency are normalized by N * k (contexts times
    annotators) whether or not a key reached every pool, so rare keys
    score low by construction. The unweighted axis means run over the
    instances that were actually rated and are None for keys never rated.
    """
    ratings = list(ratings)
    if keys is None:
        keys = _keys_from_pools(pools)
    if strict:
        validate_step3_complete(ratings, step3_pools, annotators)
    n = len(step3_pools) if n_contexts is None else n_contexts
    k = len(annotators)
    if n == 0 or k == 0:
        return {key: Step3Scores(0.0, None, None, None, None) for key in keys}

    indexed: dict[tuple[str, str, str], Step3Rating] = {
        (r.annotator, r.context_ref, r.response_id): r for r in ratings
    }
    out: dict[ModelKey, Step3Scores] = {}
    for key in keys:
        weighted_total = 0.0
        fluency_total = 0.0
        axis_values: dict[str, list[float]] = {}
        n_rated = 0
        for context_ref, pool_ids in step3_pools.items():
            pool = pools.get(context_ref)
            entry = pool.entry_for(key) if pool is not None else None
            if entry is None or entry.response_id not in pool_ids:
                continue
            for annotator in annotators:
                rating = indexed.get((annotator, context_ref, entry.response_id))
                if rating is None:
                    continue
                response_score, axis_scores, fluency = _rating_scores(rating, questionnaire)
                weighted_total += response_score
                if fluency is not None:
                    fluency_total += fluency
                for axis, value in axis_scores.items():
                    axis_values.setdefault(axis, []).append(value)
                n_rated += 1

        def axis_mean(axis: str) -> float | None:
            values = axis_values.get(axis)
            return 100.0 * mean(values) if values else None

        has_fluency = any(q.id == FLUENCY_QUESTION_ID for q in questionnaire.questions)
        out[key] = Step3Scores(
            socemo=100.0 * weighted_total / (n * k),
            logical=axis_mean("logical"),
            emotional=axis_mean("emotional"),
            social=axis_mean("social"),
            weighted_fluency=(100.0 * fluency_total / (n * k)) if has_fluency else None,
            n_rated=n_rated,
        )
    return out


@dataclass(frozen=True)
class KeyScores:
    filter: float
    top3: float
    socemo: float
    logical: float | None
    emotional: float | None
    social: float | None
    weighted_fluency: float | None


def build_score_report(
    pools: Mapping[str, ResponsePool],
    step1: Sequence[Step1Judgment],
    step2: Sequence[Step2Selection],
    step3: Sequence[Step3Rating],
    step3_pools: Mapping[str, Set],
    questionnaire: QuestionnaireSpec,
    annotators: Sequence[str],
    keys: Sequence[ModelKey] | None = None,
    n_step3_contexts: int | None = None,
) -> dict[ModelKey, KeyScores]:
    """All scores in one table; zero-filled where no judgments exist yet."""
    if keys is None:
        keys = _keys_from_pools(pools)
    try:
        filters = score_filter(step1, pools, keys)
    except NoJudgments:
        filters = {key: 0.0 for key in keys}
    try:
        top3s = score_top3(step2, pools, keys)
    except NoJudgments:
        top3s = {key: 0.0 for key in keys}
    step3s = score_step3(
        step3, step3_pools, pools, questionnaire, annotators, keys,
        n_contexts=n_step3_contexts,
    )
    return {
        key: KeyScores(
            filter=filters[key],
            top3=top3s[key],
            socemo=step3s[key].socemo,
            logical=step3s[key].logical,
            emotional=step3s[key].emotional,
            social=step3s[key].social,
            weighted_fluency=step3s[key].weighted_fluency,
        )
        for key in keys
    }


def report_to_rows(report: Mapping[ModelKey, KeyScores]) -> list[dict]:
    rows = []
    for key in sorted(report):
        scores = report[key]
        rows.append(
            {
                "model": key.model,
                "mode": key.mode,
                "approach": key.approach,
                "filter": scores.filter,
                "top3": scores.top3,
                "socemo": scores.socemo,
                "logical": scores.logical,
                "emotional": scores.emotional,
                "social": scores.social,
                "weighted_fluency": scores.weighted_fluency,
            }
        )
    return rows


def report_to_table(report: Mapping[ModelKey, KeyScores]) -> str:
    """Fixed-width text table over the full score column set."""
    header = (
        "model", "mode", "approach",
        "filtered", "top3", "socemo", "logical", "emotional", "social", "w-fluency",
    )
    body = []
    for row in report_to_rows(report):
        body.append(
            (
                row["model"],
                row["mode"],
                row["approach"],
            )
            + tuple(
                "-" if row[col] is None else f"{row[col]:.1f}"
                for col in (
                    "filter", "top3", "socemo", "logical", "emotional", "social",
                    "weighted_fluency",
                )
            )
        )
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    lines = []
    for line in [header] + body:
        cells = [
            line[i].ljust(widths[i]) if i < 3 else line[i].rjust(widths[i])
            for i in range(len(header))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


# --- agreement --------------------------------------------------------------------


@dataclass(frozen=True)
class PairAgreement:
    annotators: tuple[str, str]
    alpha: float | None
    kept_jaccard: float
    n_contexts: int


@dataclass(frozen=True)
class AgreementReport:
    pairs: tuple[PairAgreement, ...]
    mean_alpha: float | None
    mean_kept_jaccard: float


def agreement_report(judgments: Iterable[Step1Judgment]) -> AgreementReport:
    """Step-1 agreement: per annotator pair, Krippendorff's alpha over
    kept-sets (set-valued, Jaccard distance) and mean kept-list overlap."""
    from itertools import combinations

    kept: dict[tuple[str, str], frozenset[str]] = {}
    annotators: list[str] = []
    for judgment in judgments:
        if judgment.annotator not in annotators:
            annotators.append(judgment.annotator)
        kept[(judgment.annotator, judgment.context_ref)] = judgment.kept_ids()
    if len(annotators) < 2:
        raise InsufficientData("agreement needs two annotators with judgments")

    pairs: list[PairAgreement] = []
    for a, b in combinations(sorted(annotators), 2):
        shared = sorted(
            {ctx for ann, ctx in kept if ann == a} & {ctx for ann, ctx in kept if ann == b}
        )
        if not shared:
            continue
        matrix = AnnotationMatrix.from_records(
            [(ctx, a, kept[(a, ctx)]) for ctx in shared]
            + [(ctx, b, kept[(b, ctx)]) for ctx in shared]
        )
        try:
            alpha = krippendorff_alpha(matrix, jaccard_distance)
        except InsufficientData:
            alpha = None
        overlap = mean(pairwise_list_jaccard(kept[(a, ctx)], kept[(b, ctx)]) for ctx in shared)
        pairs.append(PairAgreement((a, b), alpha, overlap, len(shared)))
    if not pairs:
        raise InsufficientData("no annotator pair shares a judged context")

    alphas = [p.alpha for p in pairs if p.alpha is not None]
    return AgreementReport(
        pairs=tuple(pairs),
        mean_alpha=mean(alphas) if alphas else None,
        mean_kept_jaccard=mean(p.kept_jaccard for p in pairs),
    )


# --- bundles ----------------------------------------------------------------------

BUNDLE_VERSION = "v1"


@dataclass
class BundleData:
    """Everything a campaign export carries; also the input to offline
    scoring and agreement tooling."""

    campaign_id: str
    seed: int
    annotators: tuple[str, ...]
    contexts: tuple[str, ...]
    practice: tuple[str, ...]
    step3_contexts: tuple[str, ...]
    questionnaire: QuestionnaireSpec
    pools: dict[str, ResponsePool]
    step1: list[Step1Judgment]
    step2: list[Step2Selection]
    step3: list[Step3Rating]

    def scoreable_contexts(self) -> tuple[str, ...]:
        practice = set(self.practice)
        return tuple(c for c in self.contexts if c not in practice)

    def step3_pool_map(self) -> dict[str, frozenset[str]]:
        by_context: dict[str, list[Step2Selection]] = {}
        for selection in self.step2:
            by_context.setdefault(selection.context_ref, []).append(selection)
        return {
            ctx: union_top3(by_context.get(ctx, []))
            for ctx in self.step3_contexts
        }

    def scores(self) -> dict[ModelKey, KeyScores]:
        practice = set(self.practice)
        return build_score_report(
            pools={c: p for c, p in self.pools.items() if c not in practice},
            step1=[j for j in self.step1 if j.context_ref not in practice],
            step2=[s for s in self.step2 if s.context_ref not in practice],
            step3=[r for r in self.step3 if r.context_ref not in practice],
            step3_pools=self.step3_pool_map(),
            questionnaire=self.questionnaire,
            annotators=self.annotators,
            n_step3_contexts=len(self.step3_contexts),
        )


def _pool_to_dict(pool: ResponsePool) -> dict:
    return {
        "kind": "pool",
        "context_ref": pool.context_ref,
        "context_turns": [{"speaker": s, "text": t} for s, t in pool.context_turns],
        "entries": [
            {
                "response_id": e.response_id,
                "text": e.text,
                "producers": [k.to_dict() for k in sorted(e.producers)],
            }
            for e in pool.entries
        ],
    }


def _pool_from_dict(raw: Mapping) -> ResponsePool:
    return ResponsePool(
        context_ref=raw["context_ref"],
        context_turns=tuple((t["speaker"], t["text"]) for t in raw.get("context_turns", [])),
        entries=tuple(
            PoolEntry(
                response_id=e["response_id"],
                text=e["text"],
                producers=frozenset(ModelKey.from_dict(k) for k in e["producers"]),
            )
            for e in raw["entries"]
        ),
    )


def write_bundle(data: BundleData) -> str:
    """Deterministic JSON-lines serialization; scores are recomputed from
    the judgments at write time, so they can never drift from the data."""
    context_order = {ctx: i for i, ctx in enumerate(data.contexts)}

    def ctx_pos(ref: str) -> tuple:
        return (context_order.get(ref, len(context_order)), ref)

    lines: list[dict] = [
        {
            "kind": "meta",
            "version": BUNDLE_VERSION,
            "campaign_id": data.campaign_id,
            "seed": data.seed,
            "annotators": list(data.annotators),
            "contexts": list(data.contexts),
            "practice": list(data.practice),
            "step3_contexts": list(data.step3_contexts),
        },
        {"kind": "questionnaire", **data.questionnaire.to_dict()},
    ]
    for ctx in sorted(data.pools, key=ctx_pos):
        lines.append(_pool_to_dict(data.pools[ctx]))
    for judgment in sorted(data.step1, key=lambda j: (ctx_pos(j.context_ref), j.annotator)):
        lines.append(
            {
                "kind": "step1",
                "annotator": judgment.annotator,
                "context_ref": judgment.context_ref,
                "kept": {rid: judgment.kept[rid] for rid in sorted(judgment.kept)},
                "flags": {
                    rid: {"consistent": c, "specific": s}
                    for rid, (c, s) in sorted(judgment.flags.items())
                },
            }
        )
    for selection in sorted(data.step2, key=lambda s: (ctx_pos(s.context_ref), s.annotator)):
        lines.append(
            {
                "kind": "step2",
                "annotator": selection.annotator,
                "context_ref": selection.context_ref,
                "top3": list(selection.top3),
            }
        )
    for rating in sorted(
        data.step3, key=lambda r: (ctx_pos(r.context_ref), r.annotator, r.response_id)
    ):
        lines.append(
            {
                "kind": "step3",
                "annotator": rating.annotator,
                "context_ref": rating.context_ref,
                "response_id": rating.response_id,
                "tagged_text": rating.tagged_text,
                "ratings": {qid: rating.ratings[qid] for qid in sorted(rating.ratings)},
            }
        )
    score_rows = report_to_rows(data.scores())
    lines.append({"kind": "scores", "report": score_rows})
    return "".join(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n" for line in lines)


def read_bundle(text: str) -> BundleData:
    meta = None
    questionnaire = None
    pools: dict[str, ResponsePool] = {}
    step1: list[Step1Judgment] = []
    step2: list[Step2Selection] = []
    step3: list[Step3Rating] = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise ProtocolError(f"bundle line {i} is not JSON: {exc}") from exc
        kind = raw.get("kind")
        if kind == "meta":
            meta = raw
        elif kind == "questionnaire":
            questionnaire = QuestionnaireSpec.from_dict(raw)
        elif kind == "pool":
            pool = _pool_from_dict(raw)
            pools[pool.context_ref] = pool
        elif kind == "step1":
            step1.append(
                Step1Judgment(
                    annotator=raw["annotator"],
                    context_ref=raw["context_ref"],
                    kept=dict(raw["kept"]),
                    flags={
                        rid: (f["consistent"], f["specific"])
                        for rid, f in raw.get("flags", {}).items()
                    },
                )
            )
        elif kind == "step2":
            step2.append(
                Step2Selection(
                    annotator=raw["annotator"],
                    context_ref=raw["context_ref"],
                    top3=tuple(raw["top3"]),
                )
            )
        elif kind == "step3":
            step3.append(
                Step3Rating(
                    annotator=raw["annotator"],
                    context_ref=raw["context_ref"],
                    response_id=raw["response_id"],
                    tagged_text=raw["tagged_text"],
                    ratings=dict(raw["ratings"]),
                )
            )
        elif kind == "scores":
            continue  # recomputed from judgments on every write
        else:
            raise ProtocolError(f"bundle line {i} has unknown kind {kind!r}")
    if meta is None:
        raise ProtocolError("bundle has no meta line")
    if questionnaire is None:
        raise ProtocolError("bundle has no questionnaire line")
    return BundleData(
        campaign_id=meta["campaign_id"],
        seed=int(meta["seed"]),
        annotators=tuple(meta["annotators"]),
        contexts=tuple(meta["contexts"]),
        practice=tuple(meta.get("practice", [])),
        step3_contexts=tuple(meta.get("step3_contexts", [])),
        questionnaire=questionnaire,
        pools=pools,
        step1=step1,
        step2=step2,
        step3=step3,
    )
