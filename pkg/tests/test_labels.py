import pytest

from socioplan.labels import (
    ACTS,
    ALL_LABELS,
    EMOTIONS,
    Label,
    LabelKind,
    sequence_from_text,
    sequence_to_text,
)


def test_alphabet_has_eleven_labels():
    assert len(ALL_LABELS) == 11
    assert len(ACTS) == 4
    assert len(EMOTIONS) == 7
    assert set(ACTS) | set(EMOTIONS) == set(ALL_LABELS)


def test_acts_come_before_emotions_in_canonical_order():
    assert ALL_LABELS[:4] == ACTS
    assert ALL_LABELS[4:] == EMOTIONS


def test_kind_partition():
    for label in ACTS:
        assert label.kind is LabelKind.ACT
    for label in EMOTIONS:
        assert label.kind is LabelKind.EMOTION


def test_from_text_is_case_insensitive():
    assert Label.from_text("Inform") is Label.INFORM
    assert Label.from_text("HAPPINESS") is Label.HAPPINESS
    assert Label.from_text(" surprise ") is Label.SURPRISE


def test_from_text_rejects_unknown_names():
    with pytest.raises(ValueError):
        Label.from_text("joy")


def test_sequence_text_round_trip():
    seq = (Label.COMMISSIVE, Label.HAPPINESS)
    assert sequence_to_text(seq) == "commissive, happiness"
    assert sequence_from_text("commissive, happiness") == seq


def test_str_is_the_wire_name():
    assert str(Label.DIRECTIVE) == "directive"
