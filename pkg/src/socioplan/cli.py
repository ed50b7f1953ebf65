"""Command line front end.

Every subcommand prints its result to stdout (fixed-width table by
default, JSON with --json) and reports failures as one JSON object on
stderr. Exit codes are stable so scripts can branch on them:

    0  success
    2  usage error
    3  missing or unreadable file
    4  backend failure
    5  invalid data or request
    1  anything unexpected
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import BackendError, Backends, HttpBackend, HttpBackendConfig, mock_backends
from .corpus import (
    CodeTable,
    CorpusError,
    build_samples,
    corpus_stats,
    parse_corpus,
    read_samples,
    write_samples,
)
from .metrics import InsufficientData, MetricError
from .pipeline import (
    ConditioningMode,
    GenerationConfig,
    PipelineError,
    read_records,
    run_split,
    write_records,
)
from .planning import (
    OraclePlanner,
    PlannerFailed,
    PlanningError,
    RandomPlanner,
    RemotePlanner,
)
from .protocol import (
    ProtocolError,
    agreement_report,
    load_questionnaire,
    report_to_rows,
    report_to_table,
)
from .service import (
    CampaignConfig,
    CampaignStore,
    ServiceError,
    build_store,
    load_service_config,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_BACKEND = 4
EXIT_INVALID = 5
EXIT_UNEXPECTED = 1


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail: str):
        self.code = code
        self.kind = kind
        self.detail = detail
        super().__init__(detail)


def _fail(code: int, kind: str, detail: str) -> CliError:
    return CliError(code, kind, detail)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _fail(EXIT_FILE, "file_error", f"{path}: {exc.strerror or exc}") from exc


def _load_samples(path: str):
    try:
        split = read_samples(path)
    except OSError as exc:
        raise _fail(EXIT_FILE, "file_error", f"{path}: {exc.strerror or exc}") from exc
    if not split.samples:
        raise _fail(EXIT_INVALID, "empty_input", f"{path} holds no samples")
    return split


def _table(rows: list[tuple[str, str]]) -> str:
    width = max(len(name) for name, _ in rows)
    return "".join(f"{name:<{width}}  {value}\n" for name, value in rows)


def _emit(args, payload: dict, rows: list[tuple[str, str]]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(_table(rows), end="")


# --- subcommands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    table = CodeTable.load(args.codes) if args.codes else CodeTable.default()
    conversations = parse_corpus(
        _read_text(args.dialogues),
        _read_text(args.acts),
        _read_text(args.emotions),
        table=table,
        id_prefix=args.id_prefix,
    )
    split = build_samples(
        conversations,
        window=args.window,
        name=args.id_prefix,
        suppress_neutral=not args.keep_neutral,
    )
    write_samples(split, args.out)
    stats = corpus_stats(split)
    _emit(
        args,
        {
            "conversations": len(conversations),
            "samples": stats.n_samples,
            "mean_gold_length": stats.mean_gold_length,
            "out": args.out,
        },
        [
            ("conversations", str(len(conversations))),
            ("samples", str(stats.n_samples)),
            ("mean gold length", f"{stats.mean_gold_length:.4f}"),
            ("written to", args.out),
        ],
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    split = _load_samples(args.samples)
    stats = corpus_stats(split)
    freq_rows = [
        (str(label), str(count))
        for label, count in sorted(
            stats.label_frequency.items(), key=lambda kv: (-kv[1], str(kv[0]))
        )
    ]
    _emit(
        args,
        {
            "samples": stats.n_samples,
            "mean_gold_length": stats.mean_gold_length,
            "label_frequency": {str(k): v for k, v in stats.label_frequency.items()},
        },
        [
            ("samples", str(stats.n_samples)),
            ("mean gold length", f"{stats.mean_gold_length:.4f}"),
        ]
        + freq_rows,
    )
    return EXIT_OK


def _make_planner(args):
    if args.planner == "random":
        return RandomPlanner(seed=args.seed)
    if args.planner == "oracle":
        return OraclePlanner()
    if not args.base_url:
        raise _fail(EXIT_USAGE, "usage", "--base-url is required with --planner remote")
    return RemotePlanner(HttpBackend(HttpBackendConfig(base_url=args.base_url)))


def cmd_plan_eval(args) -> int:
    from .planning import evaluate_planner

    split = _load_samples(args.samples)
    report = evaluate_planner(_make_planner(args), split)
    payload = report.to_dict()
    rows = [
        ("samples", str(report.n_samples)),
        ("jaccard", f"{report.jaccard:.4f}"),
        ("precision", f"{report.precision:.4f}"),
        ("recall", f"{report.recall:.4f}"),
        ("f1", f"{report.f1:.4f}"),
        ("mean length", f"{report.mean_len:.4f}"),
        ("nls", "-" if report.nls is None else f"{report.nls:.4f}"),
    ]
    _emit(args, payload, rows)
    return EXIT_OK


def _make_backends(args) -> Backends:
    if args.backend == "mock":
        return mock_backends(seed=args.seed, name=args.model)
    if not args.base_url:
        raise _fail(EXIT_USAGE, "usage", "--base-url is required with --backend http")
    http = HttpBackend(HttpBackendConfig(base_url=args.base_url))
    return Backends(generator=http, classifier=http, planner=http)


def cmd_run(args) -> int:
    samples = list(_load_samples(args.samples).samples)
    if args.limit:
        samples = samples[: args.limit]
    config = GenerationConfig(
        model=args.model,
        approach=args.approach,
        mode=ConditioningMode(args.mode),
        n_candidates=args.n_candidates,
        classifier_threshold=args.threshold,
        nocd_from_pool=args.nocd_from_pool,
    )
    backends = _make_backends(args)
    planner = None
    if config.mode is ConditioningMode.CD_PRED:
        if backends.planner is None:
            raise _fail(EXIT_USAGE, "usage", "this backend cannot predict labels")
        planner = RemotePlanner(backends.planner)
    records = run_split(samples, config, backends, planner=planner, jobs=args.jobs)
    write_records(records, args.out)
    n_failed = sum(1 for r in records if r.failed)
    n_unparsable = sum(1 for r in records if r.unparsable)
    n_fallback = sum(1 for r in records if r.fallback_nocd)
    _emit(
        args,
        {
            "records": len(records),
            "failed": n_failed,
            "unparsable": n_unparsable,
            "fallback_nocd": n_fallback,
            "out": args.out,
        },
        [
            ("records", str(len(records))),
            ("failed", str(n_failed)),
            ("unparsable", str(n_unparsable)),
            ("fallback to plain", str(n_fallback)),
            ("written to", args.out),
        ],
    )
    return EXIT_OK


def cmd_campaign_create(args) -> int:
    split = _load_samples(args.samples)
    records = []
    for path in args.records:
        try:
            records.extend(read_records(path))
        except OSError as exc:
            raise _fail(EXIT_FILE, "file_error", f"{path}: {exc.strerror or exc}") from exc
    if not records:
        raise _fail(EXIT_INVALID, "empty_input", "no run records in the given files")
    references = {}
    display_turns = {}
    for sample in split.samples:
        if sample.gold_response:
            references[sample.ref] = sample.gold_response
        display_turns[sample.ref] = [(t.speaker, t.text) for t in sample.context]
    questionnaire = None
    if args.questionnaire:
        questionnaire = load_questionnaire(args.questionnaire)
    config_kwargs = dict(
        campaign_id=args.campaign_id,
        seed=args.seed,
        annotators=tuple(args.annotators.split(",")),
        n_contexts=args.contexts,
        n_step3_contexts=args.step3_contexts,
        practice_contexts=args.practice,
    )
    if questionnaire is not None:
        config_kwargs["questionnaire"] = questionnaire
    config = CampaignConfig(**config_kwargs)
    store = CampaignStore(args.data_dir)
    campaign = store.create_campaign(records, references, config, display_turns)
    payload = {
        "campaign_id": campaign.config.campaign_id,
        "contexts": len(campaign.contexts),
        "step3_contexts": len(campaign.step3_contexts),
        "tokens": dict(campaign.tokens),
    }
    rows = [
        ("campaign", campaign.config.campaign_id),
        ("contexts", str(len(campaign.contexts))),
        ("step-3 contexts", str(len(campaign.step3_contexts))),
    ] + [(f"token {a}", t) for a, t in campaign.tokens.items()]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_service_config(args.config)
    if args.port is not None:
        import dataclasses

        config = dataclasses.replace(config, port=args.port)
    if args.data_dir is not None:
        import dataclasses

        config = dataclasses.replace(config, data_dir=args.data_dir)
    store = build_store(config)
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    return EXIT_OK


def _open_campaign(args):
    store = CampaignStore(args.data_dir)
    from .service import UnknownCampaign

    try:
        return store.get(args.campaign_id)
    except UnknownCampaign as exc:
        raise _fail(EXIT_FILE, "unknown_campaign", str(exc)) from exc


def cmd_score(args) -> int:
    campaign = _open_campaign(args)
    report = campaign.scores()
    if args.json:
        print(json.dumps({"report": report_to_rows(report)}, indent=2, sort_keys=True))
    else:
        print(report_to_table(report), end="")
    return EXIT_OK


def cmd_agree(args) -> int:
    campaign = _open_campaign(args)
    judgments = [
        j for j in campaign.step1.values() if j.context_ref not in campaign.practice
    ]
    try:
        report = agreement_report(judgments)
    except InsufficientData as exc:
        raise _fail(EXIT_INVALID, "insufficient_data", str(exc)) from exc
    payload = {
        "mean_alpha": report.mean_alpha,
        "mean_kept_jaccard": report.mean_kept_jaccard,
        "pairs": [
            {
                "annotators": list(p.annotators),
                "alpha": p.alpha,
                "kept_jaccard": p.kept_jaccard,
                "n_contexts": p.n_contexts,
            }
            for p in report.pairs
        ],
    }
    rows = [
        ("mean alpha", "-" if report.mean_alpha is None else f"{report.mean_alpha:.4f}"),
        ("mean kept jaccard", f"{report.mean_kept_jaccard:.4f}"),
    ] + [
        (
            " & ".join(p.annotators),
            ("-" if p.alpha is None else f"{p.alpha:.4f}") + f"  (n={p.n_contexts})",
        )
        for p in report.pairs
    ]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_export(args) -> int:
    campaign = _open_campaign(args)
    text = campaign.export()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(json.dumps({"out": args.out, "lines": text.count("\n")}))
    else:
        print(text, end="")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socioplan",
        description="Plan, generate, and judge socio-emotional dialogue responses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw corpus streams into context samples")
    p.add_argument("--dialogues", required=True)
    p.add_argument("--acts", required=True)
    p.add_argument("--emotions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--codes", help="yaml/json file overriding the label code tables")
    p.add_argument("--id-prefix", default="dlg")
    p.add_argument("--keep-neutral", action="store_true",
                   help="keep neutral emotion labels instead of dropping them")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="summarize a samples file")
    p.add_argument("samples")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plan-eval", help="score a label planner against gold labels")
    p.add_argument("samples")
    p.add_argument("--planner", choices=["random", "oracle", "remote"], default="random")
    p.add_argument("--base-url")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_plan_eval)

    p = sub.add_parser("run", help="generate and select responses for each sample")
    p.add_argument("samples")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[m.value for m in ConditioningMode], default="nocd")
    p.add_argument("--model", default="mock")
    p.add_argument("--approach", default="reranking")
    p.add_argument("--n-candidates", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--nocd-from-pool", action="store_true",
                   help="let the plain mode pick from a full candidate pool")
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--base-url")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--limit", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("campaign-create", help="build an annotation campaign from run records")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--campaign-id", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--annotators", required=True, help="comma-separated annotator names")
    p.add_argument("--contexts", type=int)
    p.add_argument("--step3-contexts", type=int, default=0)
    p.add_argument("--practice", type=int, default=0)
    p.add_argument("--questionnaire", help="yaml file replacing the default questionnaire")
    p.add_argument("--data-dir", default="./campaign-data")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_campaign_create)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--config", help="yaml service config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("score", help="print a campaign's score report")
    p.add_argument("campaign_id")
    p.add_argument("--data-dir", default="./campaign-data")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("agree", help="step-1 inter-annotator agreement")
    p.add_argument("campaign_id")
    p.add_argument("--data-dir", default="./campaign-data")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("export", help="write a campaign bundle")
    p.add_argument("campaign_id")
    p.add_argument("--data-dir", default="./campaign-data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "detail": exc.detail}), file=sys.stderr)
        return exc.code
    except (BackendError, PlannerFailed) as exc:
        print(json.dumps({"error": "backend_error", "detail": str(exc)}), file=sys.stderr)
        return EXIT_BACKEND
    except (
        CorpusError,
        MetricError,
        PipelineError,
        PlanningError,
        ProtocolError,
        ServiceError,
        ValueError,
    ) as exc:
        print(json.dumps({"error": "invalid_data", "detail": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(json.dumps({"error": "file_error", "detail": str(exc)}), file=sys.stderr)
        return EXIT_FILE
    except Exception as exc:  # pragma: no cover - last resort
        print(json.dumps({"error": "unexpected", "detail": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
