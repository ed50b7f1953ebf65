"""Socio-emotional response planning, generation, and human evaluation."""

from .labels import ACTS, ALL_LABELS, EMOTIONS, Label, LabelKind
from .corpus import (
    CodeTable,
    ContextSample,
    Conversation,
    CorpusSplit,
    DialogueTurn,
    build_samples,
    parse_corpus,
    read_samples,
    turn_labels,
    write_samples,
)
from .metrics import (
    AnnotationMatrix,
    InsufficientData,
    MetricReport,
    jaccard,
    jaccard_distance,
    krippendorff_alpha,
    levenshtein,
    multilabel_prf,
    nls,
    nominal_distance,
)
from .planning import (
    OraclePlanner,
    PlannedSequence,
    RandomPlanner,
    RemotePlanner,
    build_label_prompt,
    evaluate_planner,
    parse_label_response,
    plan_oracle,
    plan_random,
)
from .backends import (
    BackendError,
    Backends,
    HttpBackend,
    HttpBackendConfig,
    MockClassifier,
    MockGenerator,
    MockPlanner,
    backend_app,
    mock_backends,
    stable_seed,
)
from .pipeline import (
    Candidate,
    ConditioningMode,
    GenerationConfig,
    PipelineRunRecord,
    canonical_sequence,
    classify_labels,
    parse_multi_response,
    read_records,
    rerank,
    run_context,
    run_split,
    write_records,
)
from .protocol import (
    DEFAULT_QUESTIONNAIRE,
    BundleData,
    ModelKey,
    QuestionnaireSpec,
    REFERENCE_KEY,
    ResponsePool,
    Step1Judgment,
    Step2Selection,
    Step3Rating,
    agreement_report,
    build_score_report,
    dedup_pool,
    parse_tagged_response,
    read_bundle,
    report_to_rows,
    report_to_table,
    score_filter,
    score_step3,
    score_top3,
    serialize_tagged,
    union_top3,
    write_bundle,
)
from .service import (
    Campaign,
    CampaignConfig,
    CampaignStore,
    create_app,
    load_service_config,
)

__version__ = "0.1.0"

__all__ = [
    "ACTS",
    "ALL_LABELS",
    "EMOTIONS",
    "Label",
    "LabelKind",
    "CodeTable",
    "ContextSample",
    "Conversation",
    "CorpusSplit",
    "DialogueTurn",
    "build_samples",
    "parse_corpus",
    "read_samples",
    "turn_labels",
    "write_samples",
    "AnnotationMatrix",
    "InsufficientData",
    "MetricReport",
    "jaccard",
    "jaccard_distance",
    "krippendorff_alpha",
    "levenshtein",
    "multilabel_prf",
    "nls",
    "nominal_distance",
    "OraclePlanner",
    "PlannedSequence",
    "RandomPlanner",
    "RemotePlanner",
    "build_label_prompt",
    "evaluate_planner",
    "parse_label_response",
    "plan_oracle",
    "plan_random",
    "BackendError",
    "Backends",
    "HttpBackend",
    "HttpBackendConfig",
    "MockClassifier",
    "MockGenerator",
    "MockPlanner",
    "backend_app",
    "mock_backends",
    "stable_seed",
    "Candidate",
    "ConditioningMode",
    "GenerationConfig",
    "PipelineRunRecord",
    "canonical_sequence",
    "classify_labels",
    "parse_multi_response",
    "read_records",
    "rerank",
    "run_context",
    "run_split",
    "write_records",
    "DEFAULT_QUESTIONNAIRE",
    "BundleData",
    "ModelKey",
    "QuestionnaireSpec",
    "REFERENCE_KEY",
    "ResponsePool",
    "Step1Judgment",
    "Step2Selection",
    "Step3Rating",
    "agreement_report",
    "build_score_report",
    "dedup_pool",
    "parse_tagged_response",
    "read_bundle",
    "report_to_rows",
    "report_to_table",
    "score_filter",
    "score_step3",
    "score_top3",
    "serialize_tagged",
    "union_top3",
    "write_bundle",
    "Campaign",
    "CampaignConfig",
    "CampaignStore",
    "create_app",
    "load_service_config",
]
