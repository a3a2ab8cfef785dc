"""Dynamic multi-agent clinical diagnosis simulation.

A central coordinator assembles a specialist team per patient case, the team
questions a record-backed patient agent until it commits to a ranked
diagnosis list, and the results are scored against ground-truth ICD-9 codes
at category granularity.
"""

from .dataset import (
    FilterCriteria,
    build_dataset,
    dedupe_and_sample,
    extract_report_sections,
    filter_admissions,
    load_record_dir,
    load_tables,
    parse_discharge_summary,
)
from .doctors import (
    AGREE,
    DIAGNOSIS,
    DISAGREE,
    QUESTION,
    ConfidenceRating,
    ConsensusResult,
    Proposal,
    SpecialistIdentity,
    TeamState,
    Violation,
    adjust_team,
    collect_proposals,
    rate_confidence,
    resolve_consensus,
    solo_respond,
    triage_specialists,
    vote,
)
from .errors import (
    AuthenticationError,
    DynamiCareError,
    EvaluationError,
    GatewayError,
    PipelineError,
    ProtocolViolationError,
    RecordValidationError,
    ScriptMissError,
    SessionAborted,
)
from .evaluation import (
    CHAPTERS,
    MetricReport,
    aggregate,
    category_of,
    chapter_of,
    export_annotation_sheets,
    hit_at_k,
    normalize_to_icd9,
    recall_at_k,
    render_annotation_table,
    render_chapter_table,
    render_summary,
    score_annotation_sheets,
)
from .gateway import (
    ChatRequest,
    Gateway,
    LiveBackend,
    ScriptedBackend,
    ScriptedExchange,
)
from .mcq import MCQCase, MCQReport, render_accuracy_table, run_mcq_benchmark
from .patient import (
    KeywordMapping,
    PatientAnswer,
    answer_question,
    extract_keywords,
    retrieve_sections,
    route_question,
    shipped_mapping,
)
from .records import (
    GroundTruthDiagnosis,
    PatientRecord,
    TurnEntry,
    ValidationReport,
    VisitLog,
    load_patient_record,
    redact_for_fallback,
    render_initial_presentation,
    validate_patient_record,
)
from .terminology import CachedMapper, TerminologyClient, TsvCache
from .workflow import (
    SessionConfig,
    SessionResult,
    TranscriptWriter,
    force_final_diagnosis,
    run_many,
    run_session,
)

__version__ = "0.1.0"

__all__ = [
    "AGREE",
    "AuthenticationError",
    "CHAPTERS",
    "CachedMapper",
    "ChatRequest",
    "ConfidenceRating",
    "ConsensusResult",
    "DIAGNOSIS",
    "DISAGREE",
    "DynamiCareError",
    "EvaluationError",
    "FilterCriteria",
    "Gateway",
    "GatewayError",
    "GroundTruthDiagnosis",
    "KeywordMapping",
    "LiveBackend",
    "MCQCase",
    "MCQReport",
    "MetricReport",
    "PatientAnswer",
    "PatientRecord",
    "PipelineError",
    "Proposal",
    "ProtocolViolationError",
    "QUESTION",
    "RecordValidationError",
    "ScriptMissError",
    "ScriptedBackend",
    "ScriptedExchange",
    "SessionAborted",
    "SessionConfig",
    "SessionResult",
    "SpecialistIdentity",
    "TeamState",
    "TerminologyClient",
    "TranscriptWriter",
    "TsvCache",
    "TurnEntry",
    "ValidationReport",
    "Violation",
    "VisitLog",
    "adjust_team",
    "aggregate",
    "answer_question",
    "build_dataset",
    "category_of",
    "chapter_of",
    "collect_proposals",
    "dedupe_and_sample",
    "export_annotation_sheets",
    "render_annotation_table",
    "extract_keywords",
    "extract_report_sections",
    "filter_admissions",
    "force_final_diagnosis",
    "hit_at_k",
    "load_patient_record",
    "load_record_dir",
    "load_tables",
    "normalize_to_icd9",
    "parse_discharge_summary",
    "rate_confidence",
    "recall_at_k",
    "redact_for_fallback",
    "render_chapter_table",
    "render_initial_presentation",
    "render_summary",
    "resolve_consensus",
    "retrieve_sections",
    "route_question",
    "run_many",
    "render_accuracy_table",
    "run_mcq_benchmark",
    "run_session",
    "score_annotation_sheets",
    "shipped_mapping",
    "solo_respond",
    "triage_specialists",
    "validate_patient_record",
    "vote",
]
