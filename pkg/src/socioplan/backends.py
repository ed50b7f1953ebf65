"""Model backends behind one wire protocol.

Every model the pipeline talks to (generator, label classifier, label
planner) sits behind three JSON-over-HTTP endpoints:

    POST /v1/generate        {context_turns, n, mode, labels?} -> {candidates}
    POST /v1/classify        {text} -> {confidences}
    POST /v1/predict-labels  {context_turns} -> {labels}

``HttpBackend`` is the client side. The mock implementations below speak
the same interfaces in-process and are fully deterministic, which keeps
the test suite and demo runs hermetic: the generator draws paraphrases
from a cue-worded bank seeded by a hash of the context, the classifier
recovers labels from those cue words.
"""

from __future__ import annotations

import hashlib
import random
import time
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import httpx

from .corpus import DialogueTurn
from .labels import ACTS, EMOTIONS, Label, LabelKind


class BackendError(Exception):
    pass


class GeneratorBackend(Protocol):
    name: str

    def generate(
        self,
        turns: Sequence[DialogueTurn],
        n: int,
        mode: str,
        labels: Sequence[Label] | None = None,
    ) -> list[str | None]: ...


class ClassifierBackend(Protocol):
    def classify(self, text: str) -> dict[Label, float]: ...


class PlannerBackend(Protocol):
    def predict_labels(self, turns: Sequence[DialogueTurn]) -> list[str] | None: ...


@dataclass
class Backends:
    generator: GeneratorBackend
    classifier: ClassifierBackend
    planner: PlannerBackend | None = None


def wire_turns(turns: Sequence[DialogueTurn]) -> list[dict]:
    return [{"speaker": t.speaker, "text": t.text} for t in turns]


def stable_seed(*parts) -> int:
    """Process-independent integer seed from arbitrary string-able parts."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# --- HTTP client ---------------------------------------------------------------


@dataclass(frozen=True)
class HttpBackendConfig:
    base_url: str
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.2


class HttpBackend:
    """Client for all three wire endpoints of one backend server.

    Transient failures (transport errors, 5xx) are retried with a short
    exponential backoff; anything else surfaces as BackendError.
    """

    def __init__(self, config: HttpBackendConfig, name: str | None = None, transport=None):
        self.config = config
        self.name = name or config.base_url
        self._client = httpx.Client(
            base_url=config.base_url, timeout=config.timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last = exc
            else:
                if response.status_code < 500:
                    if response.status_code >= 400:
                        raise BackendError(
                            f"{path} returned {response.status_code}: {response.text[:200]}"
                        )
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise BackendError(f"{path} returned non-JSON body") from exc
                last = BackendError(f"{path} returned {response.status_code}")
            if attempt < self.config.retries:
                time.sleep(self.config.backoff * (2**attempt))
        raise BackendError(f"{path} failed after {self.config.retries + 1} attempts: {last}")

    def generate(self, turns, n, mode, labels=None):
        payload = {
            "context_turns": wire_turns(turns),
            "n": n,
            "mode": str(mode),
            "labels": None if labels is None else [str(l) for l in labels],
        }
        body = self._post("/v1/generate", payload)
        candidates = body.get("candidates")
        if not isinstance(candidates, list):
            raise BackendError("generate response lacks a candidates list")
        return [c if isinstance(c, str) else None for c in candidates]

    def classify(self, text):
        body = self._post("/v1/classify", {"text": text})
        confidences = body.get("confidences")
        if not isinstance(confidences, dict):
            raise BackendError("classify response lacks a confidences map")
        out: dict[Label, float] = {}
        for name, score in confidences.items():
            try:
                out[Label.from_text(name)] = float(score)
            except ValueError:
                continue
        if not out:
            raise BackendError("classify response carries no known labels")
        return out

    def predict_labels(self, turns):
        body = self._post("/v1/predict-labels", {"context_turns": wire_turns(turns)})
        labels = body.get("labels")
        if labels is None:
            return None
        if not isinstance(labels, list):
            raise BackendError("predict-labels response must be a list or null")
        return [str(l) for l in labels]


# --- deterministic mocks --------------------------------------------------------

# Cue words the mock classifier keys on. The mock generator builds its
# paraphrases from exactly these cues so that classifying a generated
# candidate recovers the labels it was built for.
ACT_CUES: dict[Label, str] = {
    Label.INFORM: "actually",
    Label.DIRECTIVE: "please",
    Label.COMMISSIVE: "i will",
}
EMOTION_CUES: dict[Label, str] = {
    Label.ANGER: "furious",
    Label.DISGUST: "revolting",
    Label.FEAR: "terrified",
    Label.HAPPINESS: "glad",
    Label.SADNESS: "heartbroken",
    Label.SURPRISE: "astonished",
}

_ACT_TEMPLATES: dict[Label, list[str]] = {
    Label.INFORM: [
        "It is {topic}, actually.",
        "The {topic} is already settled, actually.",
        "Actually, that depends on the {topic}.",
    ],
    Label.QUESTION: [
        "What about the {topic}?",
        "Do you mean the {topic}?",
        "How does the {topic} fit in?",
    ],
    Label.DIRECTIVE: [
        "Please have a look at the {topic}.",
        "Please bring the {topic} over here.",
        "Check the {topic} first, please.",
    ],
    Label.COMMISSIVE: [
        "I will take care of the {topic}.",
        "I will sort the {topic} out tomorrow.",
        "Fine, I will handle the {topic} myself.",
    ],
}
_EMOTION_TEMPLATES: dict[Label, list[str]] = {
    Label.ANGER: ["This makes me furious.", "I am furious about it."],
    Label.DISGUST: ["The whole thing is revolting.", "How revolting."],
    Label.FEAR: ["I am terrified of what comes next.", "It leaves me terrified."],
    Label.HAPPINESS: ["I am so glad to hear that.", "That makes me glad."],
    Label.SADNESS: ["I am heartbroken over it.", "It leaves me heartbroken."],
    Label.SURPRISE: ["I am astonished it happened.", "Well, I am astonished."],
}
_TOPICS = ["schedule", "order", "ticket", "garden", "meeting", "recipe", "trip"]


def _combo_keys() -> list[tuple[Label, Label | None]]:
    keys: list[tuple[Label, Label | None]] = [(act, None) for act in ACTS]
    keys += [
        (act, emotion)
        for act in ACTS
        for emotion in EMOTIONS
        if emotion is not Label.NEUTRAL
    ]
    return keys


def _render(act: Label, emotion: Label | None, rng: random.Random) -> str:
    topic = rng.choice(_TOPICS)
    text = rng.choice(_ACT_TEMPLATES[act]).format(topic=topic)
    if emotion is not None:
        text += " " + rng.choice(_EMOTION_TEMPLATES[emotion])
    return text


@dataclass
class MockGenerator:
    """Seeded paraphrase bank over every act/emotion combination.

    The candidate pool for a context is a deterministic function of
    (seed, context, mode, labels). If labels are passed, one candidate
    realizing exactly that combination is guaranteed into the pool, which
    is how the mock honors label-conditioned generation requests.
    """

    name: str = "mock"
    seed: int = 0

    def generate(self, turns, n, mode, labels=None):
        context_key = "|".join(t.text for t in turns)
        label_key = "" if labels is None else ",".join(str(l) for l in labels)
        rng = random.Random(stable_seed("gen", self.seed, context_key, str(mode), label_key))
        combos = _combo_keys()
        rng.shuffle(combos)
        picks = combos[:n]
        if labels:
            act = next((l for l in labels if l.kind is LabelKind.ACT), None)
            emotion = next(
                (l for l in labels if l.kind is LabelKind.EMOTION and l is not Label.NEUTRAL),
                None,
            )
            if act is not None:
                wanted = (act, emotion)
                if wanted not in picks:
                    picks[rng.randrange(len(picks))] = wanted
        return [_render(act, emotion, rng) for act, emotion in picks]


@dataclass
class MockClassifier:
    """Keyword classifier over the mock generator's cue vocabulary.

    A cue hit scores 0.9, a question mark marks the question act, and
    everything else sits at a 0.05 floor, so the default 0.7 threshold
    keeps exactly the cued labels.
    """

    hit: float = 0.9
    floor: float = 0.05

    def classify(self, text):
        lowered = text.lower()
        scores = {label: self.floor for label in ACTS + EMOTIONS}
        for label, cue in ACT_CUES.items():
            if cue in lowered:
                scores[label] = self.hit
        if "?" in text:
            scores[Label.QUESTION] = self.hit
        for label, cue in EMOTION_CUES.items():
            if cue in lowered:
                scores[label] = self.hit
        return scores


@dataclass
class MockPlanner:
    """Plans a random one-or-two label sequence, deterministic per context.

    ``failure_rate`` simulates completions with no usable labels: that
    fraction of contexts answers null.
    """

    seed: int = 0
    failure_rate: float = 0.0

    def predict_labels(self, turns):
        context_key = "|".join(t.text for t in turns)
        rng = random.Random(stable_seed("plan", self.seed, context_key))
        if rng.random() < self.failure_rate:
            return None
        from .planning import plan_random

        return [str(label) for label in plan_random(rng).labels]


def mock_backends(seed: int = 0, name: str = "mock") -> Backends:
    return Backends(
        generator=MockGenerator(name=name, seed=seed),
        classifier=MockClassifier(),
        planner=MockPlanner(seed=seed),
    )


def backend_app(backends: Backends):
    """Serve a Backends bundle over the wire protocol (test and demo use)."""
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="socioplan model backend")

    @app.post("/v1/generate")
    def generate(payload: dict):
        turns = _turns_from_wire(payload.get("context_turns"))
        labels_raw = payload.get("labels")
        labels = None
        if labels_raw is not None:
            labels = []
            for name in labels_raw:
                try:
                    labels.append(Label.from_text(name))
                except ValueError:
                    raise HTTPException(status_code=400, detail=f"unknown label {name!r}")
        candidates = backends.generator.generate(
            turns, int(payload.get("n", 1)), str(payload.get("mode", "nocd")), labels
        )
        return {"candidates": candidates}

    @app.post("/v1/classify")
    def classify(payload: dict):
        text = payload.get("text")
        if not isinstance(text, str):
            raise HTTPException(status_code=400, detail="text required")
        confidences = backends.classifier.classify(text)
        return {"confidences": {str(label): score for label, score in confidences.items()}}

    @app.post("/v1/predict-labels")
    def predict_labels(payload: dict):
        if backends.planner is None:
            raise HTTPException(status_code=404, detail="no planner configured")
        turns = _turns_from_wire(payload.get("context_turns"))
        return {"labels": backends.planner.predict_labels(turns)}

    return app


def _turns_from_wire(raw) -> list[DialogueTurn]:
    if not isinstance(raw, list) or not raw:
        from fastapi import HTTPException

        raise HTTPException(status_code=400, detail="context_turns required")
    turns = []
    for i, item in enumerate(raw):
        turns.append(
            DialogueTurn(
                speaker=str(item.get("speaker", "A" if i % 2 == 0 else "B")),
                text=str(item.get("text", "")),
                act=Label.INFORM,
                emotion=Label.NEUTRAL,
            )
        )
    return turns
