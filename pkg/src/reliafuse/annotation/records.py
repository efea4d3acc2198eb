"""Annotation record and escalation item types with JSONL persistence."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..labels import BIG_FIVE, EMOTIONS


class RecordError(ValueError):
    """An annotation record violates its invariants."""


class Stage(enum.Enum):
    LOW_LEVEL = "low"
    HIGH_LEVEL = "high"
    HUMAN_QUEUE = "human"
    FINAL = "final"


@dataclass
class AnnotationRecord:
    """One annotator run's labels for one item, with self-confidence."""

    item_id: str
    annotator_id: str
    emotions: tuple[str, ...]
    personality: str
    confidence: float
    rationale: str = ""
    is_consensus: bool = False  # explicit post-discussion consensus submission

    def __post_init__(self) -> None:
        self.emotions = tuple(self.emotions)
        bad = [e for e in self.emotions if e not in EMOTIONS]
        if bad:
            raise RecordError(f"{self.item_id}/{self.annotator_id}: unknown emotions {bad}")
        if len(set(self.emotions)) != len(self.emotions):
            raise RecordError(f"{self.item_id}/{self.annotator_id}: duplicate emotion labels")
        if self.personality not in BIG_FIVE:
            raise RecordError(
                f"{self.item_id}/{self.annotator_id}: unknown personality {self.personality!r}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise RecordError(
                f"{self.item_id}/{self.annotator_id}: confidence {self.confidence} outside [0, 1]"
            )

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "annotator_id": self.annotator_id,
            "emotions": list(self.emotions),
            "personality": self.personality,
            "confidence": self.confidence,
            "rationale": self.rationale,
            "is_consensus": self.is_consensus,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "AnnotationRecord":
        return cls(
            item_id=payload["item_id"],
            annotator_id=payload["annotator_id"],
            emotions=tuple(payload.get("emotions", ())),
            personality=payload["personality"],
            confidence=float(payload["confidence"]),
            rationale=payload.get("rationale", ""),
            is_consensus=bool(payload.get("is_consensus", False)),
        )


@dataclass
class VoteResult:
    """Strict-majority outcome: a label is accepted only with > n/2 votes."""

    emotions: tuple[str, ...]
    personality: str | None
    emotions_passed: bool
    personality_passed: bool
    tallies: dict

    @property
    def passed(self) -> bool:
        return self.emotions_passed and self.personality_passed

    def to_dict(self) -> dict:
        return {
            "emotions": list(self.emotions),
            "personality": self.personality,
            "emotions_passed": self.emotions_passed,
            "personality_passed": self.personality_passed,
            "tallies": self.tallies,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "VoteResult":
        return cls(
            emotions=tuple(payload["emotions"]),
            personality=payload["personality"],
            emotions_passed=payload["emotions_passed"],
            personality_passed=payload["personality_passed"],
            tallies=payload["tallies"],
        )


@dataclass
class QualityReport:
    """Weighted combination of agreement, vote certainty and self-confidence."""

    kappa: float
    entropy_norm: float
    mean_confidence: float
    score: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "entropy_norm": self.entropy_norm,
            "mean_confidence": self.mean_confidence,
            "score": self.score,
            "threshold": self.threshold,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QualityReport":
        return cls(**payload)


@dataclass
class StageRecord:
    stage: Stage
    vote: VoteResult
    quality: QualityReport

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "vote": self.vote.to_dict(),
            "quality": self.quality.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StageRecord":
        return cls(
            stage=Stage(payload["stage"]),
            vote=VoteResult.from_dict(payload["vote"]),
            quality=QualityReport.from_dict(payload["quality"]),
        )


@dataclass
class EscalationItem:
    """A work item moving LowLevel -> HighLevel -> HumanQueue -> Final."""

    item_id: str
    stage: Stage = Stage.LOW_LEVEL
    history: list[StageRecord] = field(default_factory=list)
    records: list[AnnotationRecord] = field(default_factory=list)
    final_emotions: tuple[str, ...] | None = None
    final_personality: str | None = None
    needs_discussion: bool = False
    context: dict = field(default_factory=dict)  # transcript, media refs, etc.

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "stage": self.stage.value,
            "history": [h.to_dict() for h in self.history],
            "records": [r.to_dict() for r in self.records],
            "final_emotions": list(self.final_emotions) if self.final_emotions is not None else None,
            "final_personality": self.final_personality,
            "needs_discussion": self.needs_discussion,
            "context": self.context,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EscalationItem":
        final_emotions = payload.get("final_emotions")
        return cls(
            item_id=payload["item_id"],
            stage=Stage(payload["stage"]),
            history=[StageRecord.from_dict(h) for h in payload.get("history", [])],
            records=[AnnotationRecord.from_dict(r) for r in payload.get("records", [])],
            final_emotions=tuple(final_emotions) if final_emotions is not None else None,
            final_personality=payload.get("final_personality"),
            needs_discussion=bool(payload.get("needs_discussion", False)),
            context=payload.get("context", {}),
        )


def load_records_jsonl(path: str | Path) -> list[AnnotationRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(AnnotationRecord.from_dict(json.loads(line)))
    return records


def save_records_jsonl(records: list[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def save_items_jsonl(items: list[EscalationItem], path: str | Path) -> None:
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), sort_keys=True) + "\n")


def load_items_jsonl(path: str | Path) -> list[EscalationItem]:
    items = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(EscalationItem.from_dict(json.loads(line)))
    return items
