"""Label metrics: edit-distance similarity, set overlap, multilabel P/R/F1,
and chance-corrected inter-annotator agreement.

Sequence similarity is normalized Levenshtein similarity,

    nls(s, t) = 1 - LD(s, t) / max(len(s), len(t))

which is 1 exactly for identical sequences and 0 for sequences sharing no
token, order counting. Agreement is Krippendorff's alpha computed from
observed vs expected disagreement over all pairable values.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence, Set
from dataclasses import dataclass, replace
from statistics import mean

from .labels import ALL_LABELS, LabelSet


class MetricError(Exception):
    pass


class LengthMismatch(MetricError):
    pass


class EmptyList(MetricError):
    pass


class InsufficientData(MetricError):
    pass


def levenshtein(source: Sequence, target: Sequence) -> int:
    """Edit distance with unit-cost insert, delete, substitute."""
    if len(source) < len(target):
        source, target = target, source
    previous = list(range(len(target) + 1))
    for i, s_tok in enumerate(source, start=1):
        current = [i]
        for j, t_tok in enumerate(target, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (0 if s_tok == t_tok else 1),
                )
            )
        previous = current
    return previous[-1]


def nls(source: Sequence, target: Sequence) -> float:
    """Normalized Levenshtein similarity in [0, 1].

    Two empty sequences compare as identical, so the degenerate case is
    defined as 1.0.
    """
    longest = max(len(source), len(target))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(source, target) / longest


def jaccard(a: Set, b: Set) -> float:
    """Set overlap |a & b| / |a | b|; two empty sets count as identical."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def mean_sequence_length(sequences: Iterable[Sequence]) -> float:
    lengths = [len(s) for s in sequences]
    if not lengths:
        raise EmptyList("no sequences to average")
    return mean(lengths)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _prf(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return PRF(precision, recall, f1)


@dataclass(frozen=True)
class MetricReport:
    """Scores of a prediction run against gold label sets.

    All three averaging schemes are kept; ``averaging`` picks which one
    the flat precision/recall/f1 accessors report. Jaccard is always
    sample-averaged. ``nls`` is None for predictors with no meaningful
    token order.
    """

    jaccard: float
    micro: PRF
    macro: PRF
    samples: PRF
    mean_len: float
    n_samples: int
    nls: float | None = None
    averaging: str = "micro"

    def _selected(self) -> PRF:
        try:
            return {"micro": self.micro, "macro": self.macro, "samples": self.samples}[
                self.averaging
            ]
        except KeyError:
            raise ValueError(f"unknown averaging scheme {self.averaging!r}") from None

    @property
    def precision(self) -> float:
        return self._selected().precision

    @property
    def recall(self) -> float:
        return self._selected().recall

    @property
    def f1(self) -> float:
        return self._selected().f1

    def to_dict(self) -> dict:
        out = {
            "n_samples": self.n_samples,
            "averaging": self.averaging,
            "jaccard": self.jaccard,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mean_len": self.mean_len,
            "nls": self.nls,
            "by_scheme": {
                scheme: {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}
                for scheme, prf in (
                    ("micro", self.micro),
                    ("macro", self.macro),
                    ("samples", self.samples),
                )
            },
        }
        return out


def multilabel_prf(
    golds: Sequence[LabelSet],
    preds: Sequence[LabelSet],
    averaging: str = "micro",
) -> MetricReport:
    """Score predicted label sets against gold sets.

    Counts work on the binary indicator matrix over the eleven labels:
    micro pools true/false positives globally, macro averages per-label
    scores over all eleven labels (labels absent from both sides score 0),
    samples averages per-sample scores.
    """
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} golds vs {len(preds)} predictions")
    if not golds:
        raise LengthMismatch("no samples to score")
    if averaging not in ("micro", "macro", "samples"):
        raise ValueError(f"unknown averaging scheme {averaging!r}")

    tp_total = fp_total = fn_total = 0
    per_label = {label: [0, 0, 0] for label in ALL_LABELS}
    sample_scores: list[PRF] = []
    sample_jaccard: list[float] = []
    pred_sizes: list[int] = []

    for gold, pred in zip(golds, preds):
        gold, pred = frozenset(gold), frozenset(pred)
        tp = len(gold & pred)
        fp = len(pred - gold)
        fn = len(gold - pred)
        tp_total += tp
        fp_total += fp
        fn_total += fn
        for label in gold & pred:
            per_label[label][0] += 1
        for label in pred - gold:
            per_label[label][1] += 1
        for label in gold - pred:
            per_label[label][2] += 1
        sample_scores.append(_prf(tp, fp, fn))
        sample_jaccard.append(jaccard(gold, pred))
        pred_sizes.append(len(pred))

    label_scores = [_prf(*counts) for counts in per_label.values()]
    macro = PRF(
        mean(s.precision for s in label_scores),
        mean(s.recall for s in label_scores),
        mean(s.f1 for s in label_scores),
    )
    samples = PRF(
        mean(s.precision for s in sample_scores),
        mean(s.recall for s in sample_scores),
        mean(s.f1 for s in sample_scores),
    )
    return MetricReport(
        jaccard=mean(sample_jaccard),
        micro=_prf(tp_total, fp_total, fn_total),
        macro=macro,
        samples=samples,
        mean_len=mean(pred_sizes),
        n_samples=len(golds),
        averaging=averaging,
    )


# --- agreement ----------------------------------------------------------------


def nominal_distance(a, b) -> float:
    return 0.0 if a == b else 1.0


def jaccard_distance(a: Set, b: Set) -> float:
    return 1.0 - jaccard(a, b)


@dataclass(frozen=True)
class AnnotationMatrix:
    """Units by annotators grid of judgments; None marks a missing cell."""

    units: tuple[str, ...]
    annotators: tuple[str, ...]
    values: tuple[tuple, ...]

    def __post_init__(self):
        if len(self.values) != len(self.units):
            raise ValueError("one value row per unit required")
        for row in self.values:
            if len(row) != len(self.annotators):
                raise ValueError("one value per annotator required in each row")

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, str, object]]) -> "AnnotationMatrix":
        """Build from (unit, annotator, value) triples."""
        cells: dict[tuple[str, str], object] = {}
        units: list[str] = []
        annotators: list[str] = []
        for unit, annotator, value in records:
            if unit not in units:
                units.append(unit)
            if annotator not in annotators:
                annotators.append(annotator)
            cells[(unit, annotator)] = value
        rows = tuple(
            tuple(cells.get((unit, annotator)) for annotator in annotators)
            for unit in units
        )
        return cls(tuple(units), tuple(annotators), rows)


def krippendorff_alpha(matrix: AnnotationMatrix, distance=nominal_distance) -> float:
    """Krippendorff's alpha: 1 - observed/expected disagreement.

    Only units with at least two values contribute. Observed disagreement
    averages within-unit pair distances (each unit weighted by its pair
    count over m - 1); expected disagreement averages distances over all
    pairs of values pooled across units.
    """
    if len(matrix.annotators) < 2:
        raise InsufficientData("agreement needs at least two annotators")
    unit_values = [
        [v for v in row if v is not None] for row in matrix.values
    ]
    unit_values = [vs for vs in unit_values if len(vs) >= 2]
    if len(unit_values) < 2:
        raise InsufficientData("need two or more units carrying paired judgments")
    n = sum(len(vs) for vs in unit_values)

    d_observed = 0.0
    for vs in unit_values:
        within = sum(distance(a, b) for a, b in itertools.permutations(vs, 2))
        d_observed += within / (len(vs) - 1)
    d_observed /= n
    if d_observed == 0.0:
        return 1.0

    pooled = [v for vs in unit_values for v in vs]
    d_expected = sum(
        distance(a, b) for a, b in itertools.permutations(pooled, 2)
    ) / (n * (n - 1))
    if d_expected == 0.0:
        raise InsufficientData("expected disagreement is zero")
    return 1.0 - d_observed / d_expected


def pairwise_list_jaccard(kept_a: Iterable, kept_b: Iterable) -> float:
    """Overlap of two annotators' kept-response id lists on one unit."""
    return jaccard(frozenset(kept_a), frozenset(kept_b))


def with_nls(report: MetricReport, value: float | None) -> MetricReport:
    return replace(report, nls=value)
