import json
import random

import pytest

from socioplan.labels import Label
from socioplan.metrics import InsufficientData
from socioplan.pipeline import ConditioningMode, PipelineRunRecord
from socioplan.protocol import (
    DEFAULT_QUESTIONNAIRE,
    BundleData,
    MissingRating,
    ModelKey,
    NoJudgments,
    ProtocolError,
    Question,
    QuestionnaireSpec,
    REFERENCE_KEY,
    Segment,
    Step1Judgment,
    Step2Selection,
    Step3Rating,
    UnbalancedTags,
    UnknownTag,
    agreement_report,
    build_score_report,
    dedup_pool,
    normalize_response,
    parse_tagged_response,
    read_bundle,
    score_filter,
    score_step3,
    score_top3,
    serialize_tagged,
    shuffle_pool,
    union_top3,
    write_bundle,
)

K1 = ModelKey("alpha", "cd-gt", "reranking")
K2 = ModelKey("beta", "cd-pred", "reranking")
K3 = ModelKey("gamma", "nocd", "reranking")


def _rec(key: ModelKey, ref: str, text: str | None) -> PipelineRunRecord:
    return PipelineRunRecord(
        model=key.model,
        approach=key.approach,
        sample_ref=ref,
        mode=ConditioningMode(key.mode),
        planned=None,
        candidates=(),
        selected_index=None,
        selected_text=text,
    )


# --- dedup ------------------------------------------------------------------------


def test_dedup_merges_identical_texts():
    records = [
        _rec(K1, "c:0", "The same answer."),
        _rec(K2, "c:0", "The  same   answer."),
        _rec(K3, "c:0", "A different answer."),
    ]
    pool = dedup_pool(records, "Reference answer.", context_ref="c:0")
    assert len(pool.entries) == 3
    shared = pool.entry_for(K1)
    assert shared is pool.entry_for(K2)
    assert shared.producers == frozenset({K1, K2})
    assert pool.entry_for(K3).producers == frozenset({K3})
    assert pool.entry_for(REFERENCE_KEY).text == "Reference answer."


def test_dedup_is_case_sensitive():
    records = [
        _rec(K1, "c:0", "The same answer."),
        _rec(K2, "c:0", "THE SAME ANSWER."),
    ]
    pool = dedup_pool(records, "Reference.", context_ref="c:0")
    assert pool.entry_for(K1) is not pool.entry_for(K2)


def test_dedup_skips_failed_records():
    records = [
        _rec(K1, "c:0", "Fine answer."),
        _rec(K2, "c:0", None),
    ]
    pool = dedup_pool(records, "Reference.", context_ref="c:0")
    assert pool.entry_for(K2) is None
    assert len(pool.entries) == 2


def test_dedup_rejects_mixed_contexts():
    records = [_rec(K1, "c:0", "a"), _rec(K2, "c:1", "b")]
    with pytest.raises(ProtocolError):
        dedup_pool(records, "ref", context_ref="c:0")


def test_dedup_rejects_duplicate_keys():
    records = [_rec(K1, "c:0", "a"), _rec(K1, "c:0", "b")]
    with pytest.raises(ProtocolError):
        dedup_pool(records, "ref")


def test_response_ids_hide_the_producing_model():
    records = [_rec(K1, "c:0", "Answer text.")]
    pool_a = dedup_pool(records, "Ref.", context_ref="c:0", salt="s1")
    pool_b = dedup_pool(records, "Ref.", context_ref="c:0", salt="s2")
    rid_a = pool_a.entry_for(K1).response_id
    rid_b = pool_b.entry_for(K1).response_id
    assert rid_a != rid_b
    assert rid_a.startswith("r") and len(rid_a) == 9
    assert "alpha" not in rid_a


def test_reference_text_merges_with_model_text():
    records = [_rec(K1, "c:0", "Word for word the reference.")]
    pool = dedup_pool(records, "Word for word the reference.", context_ref="c:0")
    assert len(pool.entries) == 1
    assert pool.entries[0].producers == frozenset({K1, REFERENCE_KEY})


def test_normalize_response_collapses_whitespace():
    assert normalize_response("  a\tb\n c  ") == "a b c"


def test_shuffle_pool_is_seed_stable():
    records = [
        _rec(K1, "c:0", "one"),
        _rec(K2, "c:0", "two"),
        _rec(K3, "c:0", "three"),
    ]
    pool = dedup_pool(records, "ref", context_ref="c:0")
    order1 = shuffle_pool(pool, 11)
    order2 = shuffle_pool(pool, 11)
    order3 = shuffle_pool(pool, 12)
    assert order1 == order2
    assert {e.response_id for e in order1} == {e.response_id for e in pool.entries}
    assert order1 != order3 or len(pool.entries) == 1


# --- tagging -----------------------------------------------------------------------


def test_parse_tagged_single_segment():
    segments = parse_tagged_response("<I>I have a terrible headache.</I>")
    assert len(segments) == 1
    assert segments[0].act is Label.INFORM
    assert segments[0].text == "I have a terrible headache."


def test_parse_tagged_multiple_segments_with_whitespace():
    segments = parse_tagged_response(
        "<Q>How long has it been?</Q>  <D>Take this twice a day.</D>"
    )
    assert [s.act for s in segments] == [Label.QUESTION, Label.DIRECTIVE]


def test_parse_tagged_all_four_acts():
    text = "<I>Fact.</I><Q>Query?</Q><D>Do it.</D><C>I will.</C>"
    acts = [s.act for s in parse_tagged_response(text)]
    assert acts == [Label.INFORM, Label.QUESTION, Label.DIRECTIVE, Label.COMMISSIVE]


def test_parse_tagged_unknown_tag_reports_offset():
    with pytest.raises(UnknownTag) as err:
        parse_tagged_response("<X>mystery</X>")
    assert err.value.offset == 0
    assert err.value.tag == "X"


def test_parse_tagged_unbalanced_reports_offset():
    with pytest.raises(UnbalancedTags):
        parse_tagged_response("<I>no closing tag")
    with pytest.raises(UnbalancedTags):
        parse_tagged_response("stray text <I>x</I>")
    with pytest.raises(UnbalancedTags):
        parse_tagged_response("<I>outer <Q>inner</Q></I>")


def test_parse_tagged_mismatched_close():
    with pytest.raises(UnbalancedTags):
        parse_tagged_response("<I>text</Q>")


def test_serialize_round_trip():
    segments = (
        Segment(Label.QUESTION, "Really?"),
        Segment(Label.INFORM, "Yes, truly."),
    )
    text = serialize_tagged(segments)
    assert text == "<Q>Really?</Q><I>Yes, truly.</I>"
    assert parse_tagged_response(text) == segments


def test_segment_rejects_emotion_acts():
    with pytest.raises(ValueError):
        Segment(Label.HAPPINESS, "misplaced")


# --- questionnaire -----------------------------------------------------------------


def test_default_questionnaire_axes():
    axes = DEFAULT_QUESTIONNAIRE.axes
    assert axes == ("logical", "emotional", "social")
    assert [q.id for q in DEFAULT_QUESTIONNAIRE.by_axis("emotional")] == [
        "emotional_tone_adequacy"
    ]


def test_question_normalization():
    q = Question("q", "text", "logical")
    assert q.normalize(1) == 0.0
    assert q.normalize(5) == 1.0
    assert q.normalize(3) == 0.5


def test_rating_errors_cover_the_failure_modes():
    spec = DEFAULT_QUESTIONNAIRE
    good = {q.id: 4 for q in spec.questions}
    assert spec.rating_errors(good) == []

    missing = dict(good)
    del missing["fluency"]
    assert any("fluency" in p for p in spec.rating_errors(missing))

    extra = dict(good, invented=3)
    assert any("invented" in p for p in spec.rating_errors(extra))

    out_of_range = dict(good, fluency=9)
    assert any("fluency" in p for p in spec.rating_errors(out_of_range))

    boolean = dict(good, fluency=True)
    assert any("fluency" in p for p in spec.rating_errors(boolean))


def test_questionnaire_dict_round_trip():
    raw = DEFAULT_QUESTIONNAIRE.to_dict()
    again = QuestionnaireSpec.from_dict(raw)
    assert again == DEFAULT_QUESTIONNAIRE


# --- the scoring fixture, checked against a spreadsheet-style oracle -----------------
#
# Two contexts, two annotators, three model keys plus the reference.
# The c2 responses of alpha and beta share one text, so dedup folds them
# into a single entry and their c2 scores must move in lockstep.

ANNOTATORS = ("r1", "r2")


def _fixture_pools():
    c1 = dedup_pool(
        [
            _rec(K1, "c:1", "Alpha answer for one."),
            _rec(K2, "c:1", "Beta answer for one."),
            _rec(K3, "c:1", "Gamma answer for one."),
        ],
        "Reference answer for one.",
        context_ref="c:1",
    )
    c2 = dedup_pool(
        [
            _rec(K1, "c:2", "The shared second answer."),
            _rec(K2, "c:2", "The shared second answer."),
            _rec(K3, "c:2", "Gamma answer for two."),
        ],
        "Reference answer for two.",
        context_ref="c:2",
    )
    return {"c:1": c1, "c:2": c2}


def _rid(pools, ctx, key):
    return pools[ctx].entry_for(key).response_id


def _fixture_step1(pools):
    a1 = _rid(pools, "c:1", K1)
    a2 = _rid(pools, "c:1", K2)
    a3 = _rid(pools, "c:1", K3)
    a4 = _rid(pools, "c:1", REFERENCE_KEY)
    b1 = _rid(pools, "c:2", K1)
    b2 = _rid(pools, "c:2", K3)
    b3 = _rid(pools, "c:2", REFERENCE_KEY)
    return [
        Step1Judgment("r1", "c:1", {a1: True, a2: False, a3: True, a4: True}),
        Step1Judgment("r2", "c:1", {a1: True, a2: True, a3: True, a4: True}),
        Step1Judgment("r1", "c:2", {b1: True, b2: True, b3: True}),
        Step1Judgment("r2", "c:2", {b1: True, b2: True, b3: True}),
    ]


def _fixture_step2(pools):
    a1 = _rid(pools, "c:1", K1)
    a2 = _rid(pools, "c:1", K2)
    a3 = _rid(pools, "c:1", K3)
    a4 = _rid(pools, "c:1", REFERENCE_KEY)
    b1 = _rid(pools, "c:2", K1)
    b2 = _rid(pools, "c:2", K3)
    b3 = _rid(pools, "c:2", REFERENCE_KEY)
    return [
        Step2Selection("r1", "c:1", (a1, a3, a4)),
        Step2Selection("r2", "c:1", (a1, a2, a4)),
        Step2Selection("r1", "c:2", (b1, b2, b3)),
        Step2Selection("r2", "c:2", (b1, b2, b3)),
    ]


# value given by each annotator to each (context, key-entry), applied to
# every question of the rating; uniform per rating so the oracle stays
# readable
RATING_VALUES = {
    ("r1", "c:1", "a1"): 5, ("r2", "c:1", "a1"): 3,
    ("r1", "c:1", "a2"): 4, ("r2", "c:1", "a2"): 2,
    ("r1", "c:1", "a3"): 3, ("r2", "c:1", "a3"): 5,
    ("r1", "c:1", "a4"): 5, ("r2", "c:1", "a4"): 4,
    ("r1", "c:2", "b1"): 4, ("r2", "c:2", "b1"): 4,
    ("r1", "c:2", "b2"): 2, ("r2", "c:2", "b2"): 1,
    ("r1", "c:2", "b3"): 5, ("r2", "c:2", "b3"): 5,
}


def _slot_map(pools):
    return {
        "a1": ("c:1", _rid(pools, "c:1", K1)),
        "a2": ("c:1", _rid(pools, "c:1", K2)),
        "a3": ("c:1", _rid(pools, "c:1", K3)),
        "a4": ("c:1", _rid(pools, "c:1", REFERENCE_KEY)),
        "b1": ("c:2", _rid(pools, "c:2", K1)),
        "b2": ("c:2", _rid(pools, "c:2", K3)),
        "b3": ("c:2", _rid(pools, "c:2", REFERENCE_KEY)),
    }


def _fixture_step3(pools, drop=()):
    slots = _slot_map(pools)
    ratings = []
    for (annotator, ctx, slot), value in RATING_VALUES.items():
        if (annotator, slot) in drop:
            continue
        _, rid = slots[slot]
        ratings.append(
            Step3Rating(
                annotator=annotator,
                context_ref=ctx,
                response_id=rid,
                tagged_text="<I>Placeholder sentence.</I>",
                ratings={q.id: value for q in DEFAULT_QUESTIONNAIRE.questions},
            )
        )
    return ratings


def _step3_pools(pools):
    selections = _fixture_step2(pools)
    return {
        ctx: union_top3([s for s in selections if s.context_ref == ctx])
        for ctx in pools
    }


def _oracle_scores(pools, step1, step2, step3_ratings, step3_pools):
    """Direct arithmetic on the fixture, organized nothing like the
    implementation: every score is a flat loop over literal data."""
    keys = sorted(
        {k for pool in pools.values() for e in pool.entries for k in e.producers}
    )
    rating_lookup = {
        (r.annotator, r.context_ref, r.response_id): r for r in step3_ratings
    }
    out = {}
    for key in keys:
        # filter: per annotator, kept fraction over contexts holding the key
        per_annotator = []
        for annotator in ANNOTATORS:
            judged = 0
            kept = 0
            for judgment in step1:
                if judgment.annotator != annotator:
                    continue
                entry = pools[judgment.context_ref].entry_for(key)
                if entry is None:
                    continue
                judged += 1
                if judgment.kept.get(entry.response_id, False):
                    kept += 1
            if judged:
                per_annotator.append(kept / judged)
        filter_score = 100.0 * sum(per_annotator) / len(per_annotator)

        per_annotator = []
        for annotator in ANNOTATORS:
            judged = 0
            hits = 0
            for selection in step2:
                if selection.annotator != annotator:
                    continue
                entry = pools[selection.context_ref].entry_for(key)
                if entry is None:
                    continue
                judged += 1
                if entry.response_id in selection.top3:
                    hits += 1
            if judged:
                per_annotator.append(hits / judged)
        top3_score = 100.0 * sum(per_annotator) / len(per_annotator)

        # step 3: every pooled instance of the key, rated or not
        n_contexts = len(step3_pools)
        k = len(ANNOTATORS)
        total = 0.0
        fluency_total = 0.0
        rated_scores = []
        for ctx, pool_ids in step3_pools.items():
            entry = pools[ctx].entry_for(key)
            if entry is None or entry.response_id not in pool_ids:
                continue
            for annotator in ANNOTATORS:
                rating = rating_lookup.get((annotator, ctx, entry.response_id))
                if rating is None:
                    continue
                axis_means = []
                for axis in DEFAULT_QUESTIONNAIRE.axes:
                    values = [
                        (rating.ratings[q.id] - 1) / 4
                        for q in DEFAULT_QUESTIONNAIRE.by_axis(axis)
                    ]
                    axis_means.append(sum(values) / len(values))
                score = sum(axis_means) / len(axis_means)
                total += score
                fluency_total += (rating.ratings["fluency"] - 1) / 4
                rated_scores.append(score)
        socemo = 100.0 * total / (n_contexts * k)
        weighted_fluency = 100.0 * fluency_total / (n_contexts * k)
        axes = (
            100.0 * sum(rated_scores) / len(rated_scores) if rated_scores else None
        )
        out[key] = {
            "filter": filter_score,
            "top3": top3_score,
            "socemo": socemo,
            "axes": axes,
            "weighted_fluency": weighted_fluency,
        }
    return out


def test_scoring_matches_the_oracle_end_to_end():
    pools = _fixture_pools()
    step1 = _fixture_step1(pools)
    step2 = _fixture_step2(pools)
    step3_pools = _step3_pools(pools)
    step3 = _fixture_step3(pools)

    oracle = _oracle_scores(pools, step1, step2, step3, step3_pools)
    report = build_score_report(
        pools, step1, step2, step3, step3_pools, DEFAULT_QUESTIONNAIRE, ANNOTATORS
    )

    assert set(report) == set(oracle)
    for key, want in oracle.items():
        got = report[key]
        assert abs(got.filter - want["filter"]) < 1e-9, key
        assert abs(got.top3 - want["top3"]) < 1e-9, key
        assert abs(got.socemo - want["socemo"]) < 1e-9, key
        assert abs(got.weighted_fluency - want["weighted_fluency"]) < 1e-9, key
        for axis_value in (got.logical, got.emotional, got.social):
            assert abs(axis_value - want["axes"]) < 1e-9, key


def test_scoring_hand_frozen_values():
    """The same fixture pinned to literal numbers computed by hand."""
    pools = _fixture_pools()
    report = build_score_report(
        pools,
        _fixture_step1(pools),
        _fixture_step2(pools),
        _fixture_step3(pools),
        _step3_pools(pools),
        DEFAULT_QUESTIONNAIRE,
        ANNOTATORS,
    )
    assert abs(report[K1].filter - 100.0) < 1e-9
    assert abs(report[K2].filter - 75.0) < 1e-9
    assert abs(report[K3].filter - 100.0) < 1e-9
    assert abs(report[REFERENCE_KEY].filter - 100.0) < 1e-9

    assert abs(report[K1].top3 - 100.0) < 1e-9
    assert abs(report[K2].top3 - 75.0) < 1e-9
    assert abs(report[K3].top3 - 75.0) < 1e-9
    assert abs(report[REFERENCE_KEY].top3 - 100.0) < 1e-9

    # socemo sums of normalized uniform ratings over N*k = 4
    assert abs(report[K1].socemo - 75.0) < 1e-9
    assert abs(report[K2].socemo - 62.5) < 1e-9
    assert abs(report[K3].socemo - 43.75) < 1e-9
    assert abs(report[REFERENCE_KEY].socemo - 93.75) < 1e-9


def test_dedup_propagation_scores_shared_entry_identically():
    pools = _fixture_pools()
    report = build_score_report(
        pools,
        _fixture_step1(pools),
        _fixture_step2(pools),
        _fixture_step3(pools),
        _step3_pools(pools),
        DEFAULT_QUESTIONNAIRE,
        ANNOTATORS,
    )
    # alpha and beta share the c:2 entry; restricted to c:2 alone their
    # step-3 contributions are equal by construction
    shared = pools["c:2"].entry_for(K1)
    assert shared is pools["c:2"].entry_for(K2)
    only_c2_pools = {"c:2": pools["c:2"]}
    only_c2 = build_score_report(
        only_c2_pools,
        [j for j in _fixture_step1(pools) if j.context_ref == "c:2"],
        [s for s in _fixture_step2(pools) if s.context_ref == "c:2"],
        [r for r in _fixture_step3(pools) if r.context_ref == "c:2"],
        {"c:2": _step3_pools(pools)["c:2"]},
        DEFAULT_QUESTIONNAIRE,
        ANNOTATORS,
    )
    assert abs(only_c2[K1].filter - only_c2[K2].filter) < 1e-12
    assert abs(only_c2[K1].top3 - only_c2[K2].top3) < 1e-12
    assert abs(only_c2[K1].socemo - only_c2[K2].socemo) < 1e-12
    assert abs(only_c2[K1].weighted_fluency - only_c2[K2].weighted_fluency) < 1e-12


def test_missing_rating_lenient_versus_strict():
    pools = _fixture_pools()
    step3_pools = _step3_pools(pools)
    dropped = _fixture_step3(pools, drop={("r2", "a3")})

    scores = score_step3(
        dropped, step3_pools, pools, DEFAULT_QUESTIONNAIRE, ANNOTATORS
    )
    # gamma lost r2's 5-rating on c:1: socemo sums 0.5 + 0.25 + 0.0 over 4
    assert abs(scores[K3].socemo - 18.75) < 1e-9
    assert abs(scores[K3].logical - 25.0) < 1e-9

    with pytest.raises(MissingRating):
        score_step3(
            dropped, step3_pools, pools, DEFAULT_QUESTIONNAIRE, ANNOTATORS, strict=True
        )


def test_never_pooled_key_scores_zero_socemo_and_absent_axes():
    pools = _fixture_pools()
    # restrict step 3 to c:2 where beta has no distinct entry of its own;
    # give the step-3 pool only gamma and the reference
    b2 = _rid(pools, "c:2", K3)
    b3 = _rid(pools, "c:2", REFERENCE_KEY)
    step3_pools = {"c:2": frozenset({b2, b3})}
    ratings = [r for r in _fixture_step3(pools) if r.response_id in (b2, b3)]
    scores = score_step3(ratings, step3_pools, pools, DEFAULT_QUESTIONNAIRE, ANNOTATORS)
    assert scores[K1].socemo == 0.0
    assert scores[K1].logical is None
    assert scores[K1].emotional is None
    assert scores[K1].social is None


def test_filter_requires_judgments():
    pools = _fixture_pools()
    with pytest.raises(NoJudgments):
        score_filter([], pools)


def test_top3_never_exceeds_filter():
    rng = random.Random(21)
    pools = _fixture_pools()
    rids = {ctx: [e.response_id for e in pool.entries] for ctx, pool in pools.items()}
    for _ in range(50):
        step1 = []
        step2 = []
        for ctx, ids in rids.items():
            for annotator in ANNOTATORS:
                kept_ids = [rid for rid in ids if rng.random() < 0.8]
                while len(kept_ids) < 3:
                    kept_ids = list(
                        dict.fromkeys(kept_ids + [rng.choice(ids)])
                    )
                step1.append(
                    Step1Judgment(
                        annotator, ctx, {rid: rid in kept_ids for rid in ids}
                    )
                )
                step2.append(
                    Step2Selection(annotator, ctx, tuple(rng.sample(kept_ids, 3)))
                )
        filters = score_filter(step1, pools)
        tops = score_top3(step2, pools)
        for key in filters:
            assert 0.0 <= tops[key] <= filters[key] <= 100.0


def test_union_top3():
    s1 = Step2Selection("r1", "c:1", ("r1a", "r1b", "r1c"))
    s2 = Step2Selection("r2", "c:1", ("r1b", "r1c", "r1d"))
    assert union_top3([s1, s2]) == frozenset({"r1a", "r1b", "r1c", "r1d"})


def test_step2_requires_three_distinct():
    with pytest.raises(ValueError):
        Step2Selection("r1", "c:1", ("x", "x", "y"))
    with pytest.raises(ValueError):
        Step2Selection("r1", "c:1", ("x", "y"))


# --- agreement ----------------------------------------------------------------------


def test_agreement_perfect():
    pools = _fixture_pools()
    step1 = _fixture_step1(pools)
    # make r2 copy r1 exactly
    mirrored = []
    for judgment in step1:
        if judgment.annotator == "r1":
            mirrored.append(judgment)
            mirrored.append(
                Step1Judgment("r2", judgment.context_ref, dict(judgment.kept))
            )
    report = agreement_report(mirrored)
    assert report.mean_alpha == 1.0
    assert report.mean_kept_jaccard == 1.0
    assert len(report.pairs) == 1
    assert report.pairs[0].n_contexts == 2


def test_agreement_on_the_fixture():
    pools = _fixture_pools()
    report = agreement_report(_fixture_step1(pools))
    pair = report.pairs[0]
    assert pair.annotators == ("r1", "r2")
    # kept sets: c:1 -> {a1,a3,a4} vs all four, c:2 -> identical
    # jaccard: 3/4 and 1 -> mean 0.875
    assert abs(report.mean_kept_jaccard - 0.875) < 1e-12
    assert pair.alpha is not None
    assert pair.alpha <= 1.0


def test_agreement_insufficient_with_one_annotator():
    pools = _fixture_pools()
    only_r1 = [j for j in _fixture_step1(pools) if j.annotator == "r1"]
    with pytest.raises(InsufficientData):
        agreement_report(only_r1)


# --- bundle -------------------------------------------------------------------------


def _fixture_bundle():
    pools = _fixture_pools()
    return BundleData(
        campaign_id="camp-1",
        seed=7,
        annotators=ANNOTATORS,
        contexts=("c:1", "c:2"),
        practice=(),
        step3_contexts=("c:1", "c:2"),
        questionnaire=DEFAULT_QUESTIONNAIRE,
        pools=pools,
        step1=_fixture_step1(pools),
        step2=_fixture_step2(pools),
        step3=_fixture_step3(pools),
    )


def test_bundle_write_is_deterministic():
    data = _fixture_bundle()
    assert write_bundle(data) == write_bundle(data)


def test_bundle_round_trip_bytes():
    data = _fixture_bundle()
    text = write_bundle(data)
    again = read_bundle(text)
    assert write_bundle(again) == text


def test_bundle_lines_are_sorted_json():
    text = write_bundle(_fixture_bundle())
    lines = text.strip().split("\n")
    kinds = [json.loads(line)["kind"] for line in lines]
    assert kinds[0] == "meta"
    assert kinds[1] == "questionnaire"
    assert kinds[-1] == "scores"
    for line in lines:
        raw = json.loads(line)
        assert json.dumps(raw, sort_keys=True, ensure_ascii=False) == line


def test_bundle_scores_line_matches_score_report():
    data = _fixture_bundle()
    text = write_bundle(data)
    scores_line = json.loads(text.strip().split("\n")[-1])
    report = data.scores()
    by_key = {
        (row["model"], row["mode"], row["approach"]): row
        for row in scores_line["report"]
    }
    for key, key_scores in report.items():
        row = by_key[(key.model, key.mode, key.approach)]
        assert abs(row["socemo"] - key_scores.socemo) < 1e-9


def test_bundle_excludes_practice_from_scores():
    pools = _fixture_pools()
    data = BundleData(
        campaign_id="camp-1",
        seed=7,
        annotators=ANNOTATORS,
        contexts=("c:1", "c:2"),
        practice=("c:1",),
        step3_contexts=("c:2",),
        questionnaire=DEFAULT_QUESTIONNAIRE,
        pools=pools,
        step1=_fixture_step1(pools),
        step2=_fixture_step2(pools),
        step3=[r for r in _fixture_step3(pools) if r.context_ref == "c:2"],
    )
    report = data.scores()
    # filter over c:2 only: everyone kept everything there
    assert abs(report[K3].filter - 100.0) < 1e-9
    # shared c:2 entry rated 4 by both over N*k = 1*2
    assert abs(report[K1].socemo - 75.0) < 1e-9
    assert abs(report[K2].socemo - 75.0) < 1e-9
    # gamma's c:2 entry rated 2 and 1
    assert abs(report[K3].socemo - 12.5) < 1e-9
    assert abs(report[REFERENCE_KEY].socemo - 100.0) < 1e-9


def test_bundle_rejects_garbage():
    with pytest.raises(ProtocolError):
        read_bundle("not json\n")
    with pytest.raises(ProtocolError):
        read_bundle(json.dumps({"kind": "mystery"}) + "\n")
