"""Multi-annotator label aggregation: voting, quality gating, escalation."""

from .records import (
    AnnotationRecord,
    EscalationItem,
    QualityReport,
    Stage,
    StageRecord,
    VoteResult,
    load_records_jsonl,
    save_items_jsonl,
    save_records_jsonl,
)
from .voting import InsufficientAnnotatorsError, majority_vote
from .agreement import (
    NoOverlapError,
    cohen_kappa_from_confusion,
    corpus_kappa,
    entropy_score,
    fleiss_kappa,
    kappa,
    quality_score,
)
from .pipeline import EscalationPipeline, PipelineConfig, StageError

__all__ = [
    "AnnotationRecord",
    "EscalationItem",
    "QualityReport",
    "Stage",
    "StageRecord",
    "VoteResult",
    "load_records_jsonl",
    "save_items_jsonl",
    "save_records_jsonl",
    "InsufficientAnnotatorsError",
    "majority_vote",
    "NoOverlapError",
    "cohen_kappa_from_confusion",
    "corpus_kappa",
    "entropy_score",
    "fleiss_kappa",
    "kappa",
    "quality_score",
    "EscalationPipeline",
    "PipelineConfig",
    "StageError",
]
