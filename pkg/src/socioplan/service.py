"""Annotation campaign service.

A campaign is event-sourced: every state change (session opened, judgment
submitted) is one line in an append-only JSON log, and replaying the log
from an empty campaign reconstructs the exact same state. Pools and
assignments are emitted as the first events, so a log is self-contained.

Assignment policy: steps 1 and 2 give every context to exactly two
annotators, rotating pairs round-robin through the campaign's context
order; step 3 gives a configured subset of contexts to all annotators.
A step-3 pool for a context exists only once both of its step-2
selections are in.

Annotators never see model identities: task payloads carry response ids
and texts only. Identities stay inside pool producer sets, which only the
export reveals.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse

from .backends import ClassifierBackend, stable_seed
from .labels import ACTS
from .pipeline import PipelineRunRecord, record_from_dict
from .protocol import (
    BundleData,
    DEFAULT_QUESTIONNAIRE,
    QuestionnaireSpec,
    ResponsePool,
    Segment,
    Step1Judgment,
    Step2Selection,
    Step3Rating,
    TagError,
    _pool_from_dict,
    _pool_to_dict,
    dedup_pool,
    parse_tagged_response,
    serialize_tagged,
    shuffle_pool,
    union_top3,
    write_bundle,
)


class ServiceError(Exception):
    pass


class UnknownCampaign(ServiceError):
    pass


class UnknownSession(ServiceError):
    pass


class NoTasksRemaining(ServiceError):
    pass


class StaleTask(ServiceError):
    pass


class ValidationFailed(ServiceError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


CRITERIA_HELP = {
    "consistency": "Keep only responses that make sense as the next turn of this exact conversation.",
    "specificity": "Prefer responses that fit this conversation specifically over ones that would fit almost any conversation.",
}


@dataclass(frozen=True)
class CampaignConfig:
    campaign_id: str
    seed: int
    annotators: tuple[str, ...]
    n_contexts: int | None = None
    n_step3_contexts: int = 0
    practice_contexts: int = 0
    questionnaire: QuestionnaireSpec = DEFAULT_QUESTIONNAIRE

    def __post_init__(self):
        if len(self.annotators) < 2:
            raise ValueError("a campaign needs at least two annotators")
        if len(set(self.annotators)) != len(self.annotators):
            raise ValueError("duplicate annotator names")
        if self.practice_contexts < 0 or self.n_step3_contexts < 0:
            raise ValueError("context counts must be non-negative")
        if not re.fullmatch(r"[A-Za-z0-9._-]+", self.campaign_id):
            raise ValueError("campaign id must be filesystem-safe")

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "seed": self.seed,
            "annotators": list(self.annotators),
            "n_contexts": self.n_contexts,
            "n_step3_contexts": self.n_step3_contexts,
            "practice_contexts": self.practice_contexts,
            "questionnaire": self.questionnaire.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "CampaignConfig":
        questionnaire = raw.get("questionnaire")
        return cls(
            campaign_id=raw["campaign_id"],
            seed=int(raw["seed"]),
            annotators=tuple(raw["annotators"]),
            n_contexts=raw.get("n_contexts"),
            n_step3_contexts=int(raw.get("n_step3_contexts", 0)),
            practice_contexts=int(raw.get("practice_contexts", 0)),
            questionnaire=(
                DEFAULT_QUESTIONNAIRE
                if questionnaire is None
                else QuestionnaireSpec.from_dict(questionnaire)
            ),
        )


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Event":
        return cls(int(raw["seq"]), float(raw["ts"]), raw["kind"], dict(raw["payload"]))


def _token(seed: int, campaign_id: str, annotator: str) -> str:
    digest = hashlib.sha256(f"token|{seed}|{campaign_id}|{annotator}".encode()).hexdigest()
    return digest[:20]


def _task_id(*parts) -> str:
    return hashlib.sha1("|".join(str(p) for p in parts).encode("utf-8")).hexdigest()[:12]


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Campaign:
    """One campaign's full state plus the event log that produced it."""

    def __init__(self):
        self.config: CampaignConfig | None = None
        self.contexts: tuple[str, ...] = ()
        self.practice: frozenset[str] = frozenset()
        self.assignments: dict[str, tuple[str, str]] = {}
        self.step3_contexts: tuple[str, ...] = ()
        self.tokens: dict[str, str] = {}
        self.pools: dict[str, ResponsePool] = {}
        self.sessions: dict[str, str] = {}
        self.step1: dict[tuple[str, str], Step1Judgment] = {}
        self.step2: dict[tuple[str, str], Step2Selection] = {}
        self.step3: dict[tuple[str, str, str], Step3Rating] = {}
        self.events: list[Event] = []
        self.on_event = None  # persistence hook, set by the store

    # --- construction ----------------------------------------------------------

    @classmethod
    def create(
        cls,
        records: Sequence[PipelineRunRecord],
        references: Mapping[str, str],
        config: CampaignConfig,
        display_turns: Mapping[str, Sequence[tuple[str, str]]] | None = None,
    ) -> "Campaign":
        import random

        by_context: dict[str, list[PipelineRunRecord]] = {}
        for record in records:
            by_context.setdefault(record.sample_ref, []).append(record)
        if not by_context:
            raise ServiceError("no run records to build a campaign from")
        missing = sorted(set(by_context) - set(references))
        if missing:
            raise ServiceError(f"no reference response for contexts: {missing[:5]}")

        contexts = sorted(by_context)
        rng = random.Random(config.seed)
        if config.n_contexts is not None and config.n_contexts < len(contexts):
            contexts = rng.sample(contexts, config.n_contexts)
        if config.practice_contexts >= len(contexts):
            raise ServiceError("practice would swallow every context")
        practice = tuple(contexts[: config.practice_contexts])
        scoreable = [c for c in contexts if c not in practice]
        n_step3 = min(config.n_step3_contexts, len(scoreable))
        step3_contexts = tuple(rng.sample(scoreable, n_step3)) if n_step3 else ()

        k = len(config.annotators)
        assignments = {
            ctx: [config.annotators[j % k], config.annotators[(j + 1) % k]]
            for j, ctx in enumerate(contexts)
        }
        tokens = {
            annotator: _token(config.seed, config.campaign_id, annotator)
            for annotator in config.annotators
        }

        campaign = cls()
        campaign._emit(
            "campaign_created",
            {
                "config": config.to_dict(),
                "contexts": list(contexts),
                "practice": list(practice),
                "step3_contexts": list(step3_contexts),
                "assignments": assignments,
                "tokens": tokens,
            },
        )
        display_turns = display_turns or {}
        for ctx in contexts:
            pool = dedup_pool(
                by_context[ctx],
                references[ctx],
                context_ref=ctx,
                context_turns=display_turns.get(ctx, ()),
                salt=str(config.seed),
            )
            payload = _pool_to_dict(pool)
            payload.pop("kind", None)
            campaign._emit("pool_created", payload)
        return campaign

    @classmethod
    def replay(cls, events: Iterable[Event]) -> "Campaign":
        campaign = cls()
        for event in events:
            campaign._apply(event)
            campaign.events.append(event)
        return campaign

    def _emit(self, kind: str, payload: dict) -> Event:
        event = Event(seq=len(self.events) + 1, ts=time.time(), kind=kind, payload=payload)
        self._apply(event)
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)
        return event

    # --- state transitions -------------------------------------------------------

    def _apply(self, event: Event) -> None:
        payload = event.payload
        if event.kind == "campaign_created":
            self.config = CampaignConfig.from_dict(payload["config"])
            self.contexts = tuple(payload["contexts"])
            self.practice = frozenset(payload["practice"])
            self.step3_contexts = tuple(payload["step3_contexts"])
            self.assignments = {
                ctx: (pair[0], pair[1]) for ctx, pair in payload["assignments"].items()
            }
            self.tokens = dict(payload["tokens"])
        elif event.kind == "pool_created":
            pool = _pool_from_dict(payload)
            self.pools[pool.context_ref] = pool
        elif event.kind == "session_opened":
            self.sessions[payload["session_id"]] = payload["annotator"]
        elif event.kind == "step1_submitted":
            judgment = Step1Judgment(
                annotator=payload["annotator"],
                context_ref=payload["context_ref"],
                kept=dict(payload["kept"]),
                flags={
                    rid: (f["consistent"], f["specific"])
                    for rid, f in payload.get("flags", {}).items()
                },
            )
            self.step1[(judgment.annotator, judgment.context_ref)] = judgment
            # a replaced kept-set can invalidate the annotator's own step-2 pick
            selection = self.step2.get((judgment.annotator, judgment.context_ref))
            if selection and not set(selection.top3) <= judgment.kept_ids():
                del self.step2[(judgment.annotator, judgment.context_ref)]
                self._prune_step3(judgment.context_ref)
        elif event.kind == "step2_submitted":
            selection = Step2Selection(
                annotator=payload["annotator"],
                context_ref=payload["context_ref"],
                top3=tuple(payload["top3"]),
            )
            self.step2[(selection.annotator, selection.context_ref)] = selection
            self._prune_step3(selection.context_ref)
        elif event.kind == "step3_submitted":
            rating = Step3Rating(
                annotator=payload["annotator"],
                context_ref=payload["context_ref"],
                response_id=payload["response_id"],
                tagged_text=payload["tagged_text"],
                ratings=dict(payload["ratings"]),
            )
            self.step3[(rating.annotator, rating.context_ref, rating.response_id)] = rating
        else:
            raise ServiceError(f"unknown event kind {event.kind!r}")

    def _prune_step3(self, context_ref: str) -> None:
        """Drop ratings for responses no longer in the step-3 pool after a
        step-1 or step-2 replacement touched the pool's inputs."""
        pool = self.step3_pool(context_ref)
        for key in [k for k in self.step3 if k[1] == context_ref]:
            if pool is None or key[2] not in pool:
                del self.step3[key]

    # --- queries ------------------------------------------------------------------

    def step3_pool(self, context_ref: str) -> frozenset[str] | None:
        if context_ref not in self.step3_contexts:
            return None
        pair = self.assignments[context_ref]
        selections = [self.step2.get((a, context_ref)) for a in pair]
        if any(s is None for s in selections):
            return None
        return union_top3(selections)

    def state_digest(self) -> str:
        """Hash of everything judgment-level state contains; replay equality
        checks compare these."""
        snapshot = {
            "contexts": list(self.contexts),
            "sessions": dict(sorted(self.sessions.items())),
            "step1": {
                f"{a}|{c}": {"kept": dict(sorted(j.kept.items())), "flags": {
                    rid: list(f) for rid, f in sorted(j.flags.items())
                }}
                for (a, c), j in sorted(self.step1.items())
            },
            "step2": {
                f"{a}|{c}": list(s.top3) for (a, c), s in sorted(self.step2.items())
            },
            "step3": {
                f"{a}|{c}|{r}": {"tagged": r3.tagged_text, "ratings": dict(sorted(r3.ratings.items()))}
                for (a, c, r), r3 in sorted(self.step3.items())
            },
        }
        return hashlib.sha256(_canonical(snapshot).encode("utf-8")).hexdigest()

    def _display_order(self, annotator: str, context_ref: str):
        assert self.config is not None
        seed = stable_seed("shuffle", self.config.seed, context_ref, annotator)
        return shuffle_pool(self.pools[context_ref], seed)

    def open_session(self, token: str) -> dict:
        annotator = next((a for a, t in self.tokens.items() if t == token), None)
        if annotator is None:
            raise UnknownSession("bad token")
        session_id = f"s{len(self.events) + 1:06d}"
        self._emit("session_opened", {"session_id": session_id, "annotator": annotator})
        return {
            "session_id": session_id,
            "annotator": annotator,
            "campaign_id": self.config.campaign_id,
        }

    def _session_annotator(self, session_id: str) -> str:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"unknown session {session_id}") from None

    def next_task(self, session_id: str) -> dict:
        annotator = self._session_annotator(session_id)
        for ctx in self.contexts:
            if annotator not in self.assignments[ctx]:
                continue
            if (annotator, ctx) not in self.step1:
                return self._step1_task(annotator, ctx)
            if (annotator, ctx) not in self.step2:
                return self._step2_task(annotator, ctx)
        for ctx in self.step3_contexts:
            pool_ids = self.step3_pool(ctx)
            if pool_ids is None:
                continue
            for entry in self._display_order(annotator, ctx):
                if entry.response_id not in pool_ids:
                    continue
                if (annotator, ctx, entry.response_id) not in self.step3:
                    return self._step3_task(annotator, ctx, entry.response_id)
        raise NoTasksRemaining(f"{annotator} has no open tasks")

    def _context_turns(self, ctx: str) -> list[dict]:
        return [
            {"speaker": speaker, "text": text}
            for speaker, text in self.pools[ctx].context_turns
        ]

    def _step1_task(self, annotator: str, ctx: str) -> dict:
        order = self._display_order(annotator, ctx)
        return {
            "task_id": self._step1_task_id(annotator, ctx),
            "step": 1,
            "context_ref": ctx,
            "practice": ctx in self.practice,
            "context_turns": self._context_turns(ctx),
            "responses": [
                {"response_id": e.response_id, "text": e.text} for e in order
            ],
            "criteria": dict(CRITERIA_HELP),
        }

    def _step1_task_id(self, annotator: str, ctx: str) -> str:
        basis = ",".join(e.response_id for e in self.pools[ctx].entries)
        return _task_id(self.config.campaign_id, annotator, ctx, 1, basis)

    def _step2_task(self, annotator: str, ctx: str) -> dict:
        kept = self.step1[(annotator, ctx)].kept_ids()
        order = [e for e in self._display_order(annotator, ctx) if e.response_id in kept]
        return {
            "task_id": self._step2_task_id(annotator, ctx),
            "step": 2,
            "context_ref": ctx,
            "practice": ctx in self.practice,
            "context_turns": self._context_turns(ctx),
            "responses": [
                {"response_id": e.response_id, "text": e.text} for e in order
            ],
            "pick": 3,
        }

    def _step2_task_id(self, annotator: str, ctx: str) -> str:
        judgment = self.step1.get((annotator, ctx))
        basis = ",".join(sorted(judgment.kept_ids())) if judgment else "-"
        return _task_id(self.config.campaign_id, annotator, ctx, 2, basis)

    def _step3_task(self, annotator: str, ctx: str, response_id: str) -> dict:
        entry = self.pools[ctx].entry_by_id(response_id)
        pretagged = self.pretag(entry.text)
        return {
            "task_id": self._step3_task_id(annotator, ctx, response_id),
            "step": 3,
            "context_ref": ctx,
            "practice": ctx in self.practice,
            "context_turns": self._context_turns(ctx),
            "response": {
                "response_id": response_id,
                "text": entry.text,
                "pretagged": pretagged,
            },
            "questionnaire": self.config.questionnaire.to_dict(),
        }

    def _step3_task_id(self, annotator: str, ctx: str, response_id: str) -> str:
        pool_ids = self.step3_pool(ctx) or frozenset()
        basis = response_id + "|" + ",".join(sorted(pool_ids))
        return _task_id(self.config.campaign_id, annotator, ctx, 3, basis)

    # optional classifier used to pre-tag step-3 responses; set by the store
    pretagger: ClassifierBackend | None = None

    def pretag(self, text: str) -> str | None:
        if self.pretagger is None or "<" in text or ">" in text:
            return None
        sentences = [s.strip() for s in re.findall(r"[^.!?]+[.!?]*", text) if s.strip()]
        if not sentences:
            return None
        segments = []
        for sentence in sentences:
            confidences = self.pretagger.classify(sentence)
            act = max(ACTS, key=lambda a: confidences.get(a, 0.0))
            segments.append(Segment(act, sentence))
        return serialize_tagged(segments)

    # --- submissions ----------------------------------------------------------------

    def submit(self, session_id: str, submission: Mapping) -> dict:
        annotator = self._session_annotator(session_id)
        step = submission.get("step")
        ctx = submission.get("context_ref")
        if step not in (1, 2, 3):
            raise ValidationFailed([f"unknown step {step!r}"])
        if ctx not in self.pools:
            raise ValidationFailed([f"unknown context {ctx!r}"])
        handler = {1: self._submit_step1, 2: self._submit_step2, 3: self._submit_step3}[step]
        return handler(annotator, ctx, submission)

    def _check_task_id(self, submission: Mapping, current: str) -> None:
        sent = submission.get("task_id")
        if sent is not None and sent != current:
            raise StaleTask("task changed since it was fetched; refetch before submitting")

    def _submit_step1(self, annotator: str, ctx: str, submission: Mapping) -> dict:
        if annotator not in self.assignments.get(ctx, ()):
            raise ValidationFailed([f"{annotator} is not assigned to {ctx}"])
        self._check_task_id(submission, self._step1_task_id(annotator, ctx))
        kept_raw = submission.get("kept")
        problems = []
        if not isinstance(kept_raw, Mapping):
            raise ValidationFailed(["kept must map response ids to booleans"])
        pool_ids = {e.response_id for e in self.pools[ctx].entries}
        kept: dict[str, bool] = {}
        for rid, value in kept_raw.items():
            if rid not in pool_ids:
                problems.append(f"unknown response id {rid}")
            elif not isinstance(value, bool):
                problems.append(f"{rid}: kept flag must be a boolean")
            else:
                kept[rid] = value
        for rid in pool_ids - set(kept_raw):
            problems.append(f"missing judgment for {rid}")
        flags_raw = submission.get("flags") or {}
        flags: dict[str, tuple[bool, bool]] = {}
        for rid, f in flags_raw.items():
            if rid not in pool_ids:
                problems.append(f"flags for unknown response id {rid}")
                continue
            try:
                flags[rid] = (bool(f["consistent"]), bool(f["specific"]))
            except (KeyError, TypeError):
                problems.append(f"{rid}: flags need consistent and specific booleans")
        if problems:
            raise ValidationFailed(problems)

        payload = {
            "annotator": annotator,
            "context_ref": ctx,
            "kept": {rid: kept[rid] for rid in sorted(kept)},
            "flags": {
                rid: {"consistent": c, "specific": s} for rid, (c, s) in sorted(flags.items())
            },
        }
        existing = self.step1.get((annotator, ctx))
        if existing is not None and existing.kept == payload["kept"] and {
            rid: (f["consistent"], f["specific"]) for rid, f in payload["flags"].items()
        } == dict(existing.flags):
            return {"ok": True, "step": 1, "duplicate": True}
        self._emit("step1_submitted", payload)
        return {"ok": True, "step": 1, "duplicate": False}

    def _submit_step2(self, annotator: str, ctx: str, submission: Mapping) -> dict:
        judgment = self.step1.get((annotator, ctx))
        if judgment is None:
            raise ValidationFailed([f"step 1 for {ctx} must be submitted first"])
        self._check_task_id(submission, self._step2_task_id(annotator, ctx))
        top3 = submission.get("top3")
        problems = []
        if not isinstance(top3, Sequence) or isinstance(top3, str) or len(top3) != 3:
            raise ValidationFailed(["top3 must list exactly three response ids"])
        if len(set(top3)) != 3:
            problems.append("top3 entries must be distinct")
        kept = judgment.kept_ids()
        for rid in top3:
            if rid not in kept:
                problems.append(f"{rid} was not kept in step 1")
        if problems:
            raise ValidationFailed(problems)

        payload = {"annotator": annotator, "context_ref": ctx, "top3": list(top3)}
        existing = self.step2.get((annotator, ctx))
        if existing is not None and list(existing.top3) == list(top3):
            return {"ok": True, "step": 2, "duplicate": True}
        self._emit("step2_submitted", payload)
        return {"ok": True, "step": 2, "duplicate": False}

    def _submit_step3(self, annotator: str, ctx: str, submission: Mapping) -> dict:
        pool_ids = self.step3_pool(ctx)
        if pool_ids is None:
            raise ValidationFailed([f"{ctx} has no step-3 pool yet"])
        response_id = submission.get("response_id")
        if response_id not in pool_ids:
            raise ValidationFailed([f"{response_id!r} is not in the step-3 pool of {ctx}"])
        self._check_task_id(submission, self._step3_task_id(annotator, ctx, response_id))
        problems = []
        tagged_text = submission.get("tagged_text")
        if not isinstance(tagged_text, str):
            problems.append("tagged_text must be a string")
            segments = ()
        else:
            try:
                segments = parse_tagged_response(tagged_text)
            except TagError as exc:
                problems.append(f"tagged_text: {exc}")
                segments = ()
        if isinstance(tagged_text, str) and not problems and not segments:
            problems.append("tagged_text must contain at least one tagged segment")
        if segments and any(not seg.text for seg in segments):
            problems.append("tagged segments must not be empty")
        ratings_raw = submission.get("ratings")
        if not isinstance(ratings_raw, Mapping):
            problems.append("ratings must map question ids to integers")
            ratings_raw = {}
        else:
            problems.extend(self.config.questionnaire.rating_errors(ratings_raw))
        if problems:
            raise ValidationFailed(problems)

        payload = {
            "annotator": annotator,
            "context_ref": ctx,
            "response_id": response_id,
            "tagged_text": tagged_text,
            "ratings": {qid: int(v) for qid, v in sorted(ratings_raw.items())},
        }
        existing = self.step3.get((annotator, ctx, response_id))
        if (
            existing is not None
            and existing.tagged_text == tagged_text
            and dict(existing.ratings) == payload["ratings"]
        ):
            return {"ok": True, "step": 3, "duplicate": True}
        self._emit("step3_submitted", payload)
        return {"ok": True, "step": 3, "duplicate": False}

    # --- reporting -------------------------------------------------------------------

    def bundle(self) -> BundleData:
        return BundleData(
            campaign_id=self.config.campaign_id,
            seed=self.config.seed,
            annotators=self.config.annotators,
            contexts=self.contexts,
            practice=tuple(c for c in self.contexts if c in self.practice),
            step3_contexts=self.step3_contexts,
            questionnaire=self.config.questionnaire,
            pools=dict(self.pools),
            step1=list(self.step1.values()),
            step2=list(self.step2.values()),
            step3=list(self.step3.values()),
        )

    def export(self) -> str:
        return write_bundle(self.bundle())

    def scores(self):
        return self.bundle().scores()


class CampaignStore:
    """Disk-backed registry of campaigns, one event log per campaign.

    All mutations funnel through one lock: the log is strictly
    single-writer, concurrent readers see consistent snapshots.
    """

    def __init__(self, data_dir: str | Path, pretagger: ClassifierBackend | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.pretagger = pretagger
        self._campaigns: dict[str, Campaign] = {}
        self._lock = threading.RLock()
        for log in sorted(self.data_dir.glob("*/events.jsonl")):
            campaign = Campaign.replay(self._read_events(log))
            campaign.pretagger = self.pretagger
            self._register(campaign, log)

    @staticmethod
    def _read_events(path: Path) -> list[Event]:
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(Event.from_dict(json.loads(line)))
        return events

    def _register(self, campaign: Campaign, log: Path) -> None:
        def persist(event: Event, _log=log):
            with open(_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")

        campaign.on_event = persist
        self._campaigns[campaign.config.campaign_id] = campaign

    def create_campaign(
        self,
        records: Sequence[PipelineRunRecord],
        references: Mapping[str, str],
        config: CampaignConfig,
        display_turns=None,
    ) -> Campaign:
        with self._lock:
            if config.campaign_id in self._campaigns:
                raise ServiceError(f"campaign {config.campaign_id} already exists")
            campaign = Campaign.create(records, references, config, display_turns)
            campaign.pretagger = self.pretagger
            log = self.data_dir / config.campaign_id / "events.jsonl"
            log.parent.mkdir(parents=True, exist_ok=True)
            with open(log, "w", encoding="utf-8") as fh:
                for event in campaign.events:
                    fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
            self._register(campaign, log)
            return campaign

    def get(self, campaign_id: str) -> Campaign:
        try:
            return self._campaigns[campaign_id]
        except KeyError:
            raise UnknownCampaign(f"unknown campaign {campaign_id}") from None

    def open_session(self, token: str) -> dict:
        with self._lock:
            for campaign in self._campaigns.values():
                if token in campaign.tokens.values():
                    return campaign.open_session(token)
        raise UnknownSession("bad token")

    def _by_session(self, session_id: str) -> Campaign:
        for campaign in self._campaigns.values():
            if session_id in campaign.sessions:
                return campaign
        raise UnknownSession(f"unknown session {session_id}")

    def next_task(self, session_id: str) -> dict:
        with self._lock:
            return self._by_session(session_id).next_task(session_id)

    def submit(self, session_id: str, submission: Mapping) -> dict:
        with self._lock:
            return self._by_session(session_id).submit(session_id, submission)


# --- HTTP app -------------------------------------------------------------------------


def create_app(store: CampaignStore) -> FastAPI:
    app = FastAPI(title="socioplan annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def bad(status: int, error: str, **extra):
        raise HTTPException(status_code=status, detail={"error": error, **extra})

    @app.post("/v1/campaigns")
    async def create_campaign(request: Request):
        body = await request.json()
        try:
            config = CampaignConfig.from_dict(body["config"])
            records = [record_from_dict(r) for r in body.get("records", [])]
            references = dict(body.get("references", {}))
            display_turns = {
                ctx: [(t["speaker"], t["text"]) for t in turns]
                for ctx, turns in body.get("display_turns", {}).items()
            }
            campaign = store.create_campaign(records, references, config, display_turns)
        except (KeyError, ValueError, TypeError) as exc:
            bad(422, "bad_campaign_request", detail=str(exc))
        except ServiceError as exc:
            bad(409, "campaign_rejected", detail=str(exc))
        return {
            "campaign_id": campaign.config.campaign_id,
            "tokens": dict(campaign.tokens),
            "contexts": len(campaign.contexts),
        }

    @app.post("/v1/sessions")
    async def open_session(request: Request):
        body = await request.json()
        token = body.get("token", "")
        try:
            return store.open_session(token)
        except UnknownSession:
            bad(401, "bad_token")

    @app.get("/v1/sessions/{session_id}/next")
    def next_task(session_id: str):
        try:
            return store.next_task(session_id)
        except NoTasksRemaining:
            bad(404, "no_tasks_remaining")
        except UnknownSession:
            bad(404, "unknown_session")

    @app.post("/v1/sessions/{session_id}/submit")
    async def submit(session_id: str, request: Request):
        body = await request.json()
        try:
            return store.submit(session_id, body)
        except StaleTask as exc:
            bad(409, "stale_task", detail=str(exc))
        except ValidationFailed as exc:
            bad(422, "validation_failed", problems=exc.problems)
        except UnknownSession:
            bad(404, "unknown_session")

    @app.get("/v1/campaigns/{campaign_id}/scores")
    def scores(campaign_id: str):
        try:
            campaign = store.get(campaign_id)
        except UnknownCampaign:
            bad(404, "unknown_campaign")
        from .protocol import report_to_rows

        return {"campaign_id": campaign_id, "report": report_to_rows(campaign.scores())}

    @app.get("/v1/campaigns/{campaign_id}/export")
    def export(campaign_id: str):
        try:
            campaign = store.get(campaign_id)
        except UnknownCampaign:
            bad(404, "unknown_campaign")
        return PlainTextResponse(campaign.export(), media_type="application/x-ndjson")

    return app


# --- configuration ----------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8040
    data_dir: str = "./campaign-data"
    classifier: str | None = None  # "mock" or a backend base URL
    classifier_threshold: float = 0.7


def load_service_config(path: str | Path | None = None, env: Mapping | None = None) -> ServiceConfig:
    """Read the service config file, then apply environment overrides
    (SOCIOPLAN_PORT, SOCIOPLAN_DATA_DIR, SOCIOPLAN_CLASSIFIER_URL)."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        import yaml

        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded:
            raw.update(loaded)
    port = int(env.get("SOCIOPLAN_PORT", raw.get("port", 8040)))
    data_dir = env.get("SOCIOPLAN_DATA_DIR", raw.get("data_dir", "./campaign-data"))
    classifier = env.get("SOCIOPLAN_CLASSIFIER_URL", raw.get("classifier"))
    threshold = float(raw.get("classifier_threshold", 0.7))
    return ServiceConfig(port=port, data_dir=data_dir, classifier=classifier,
                         classifier_threshold=threshold)


def build_store(config: ServiceConfig) -> CampaignStore:
    pretagger: ClassifierBackend | None = None
    if config.classifier == "mock":
        from .backends import MockClassifier

        pretagger = MockClassifier()
    elif config.classifier:
        from .backends import HttpBackend, HttpBackendConfig

        pretagger = HttpBackend(HttpBackendConfig(base_url=config.classifier))
    return CampaignStore(config.data_dir, pretagger=pretagger)
