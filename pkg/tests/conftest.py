import pytest

from socioplan.corpus import ContextSample, DialogueTurn
from socioplan.labels import Label


def make_turn(speaker="A", text="Hello there.", act=Label.INFORM, emotion=Label.NEUTRAL):
    return DialogueTurn(speaker=speaker, text=text, act=act, emotion=emotion)


def make_context(*texts):
    speakers = ["A", "B", "A", "B"]
    turns = []
    for i, text in enumerate(texts):
        turns.append(make_turn(speaker=speakers[i % 2], text=text))
    return tuple(turns)


HEADACHE_TURNS = (
    ("A", "Good morning. What's the matter with you?"),
    ("B", "Good morning, Doctor. I have a terrible headache."),
    ("A", "All right, Young man. Tell me how it got started."),
)


@pytest.fixture
def headache_context():
    return tuple(make_turn(speaker=s, text=t) for s, t in HEADACHE_TURNS)


@pytest.fixture
def doctor_sample(headache_context):
    return ContextSample(
        conversation_id="doc-00000",
        start=0,
        context=headache_context,
        gold_labels=(Label.INFORM,),
        gold_response=(
            "Yesterday I had a runny nose. Now my nose is stuffed up. I have a sore "
            "throat. And I'm afraid I've got a temperature. I feel terrible."
        ),
    )


def make_sample(ref_num=0, gold=(Label.INFORM,), gold_response="I see what you mean.", prefix="syn"):
    texts = (
        f"Utterance number {ref_num} opens the exchange.",
        f"A reply to utterance {ref_num} follows.",
        f"Then a third turn rounds off context {ref_num}.",
    )
    return ContextSample(
        conversation_id=f"{prefix}-{ref_num:05d}",
        start=0,
        context=make_context(*texts),
        gold_labels=tuple(gold),
        gold_response=gold_response,
    )
