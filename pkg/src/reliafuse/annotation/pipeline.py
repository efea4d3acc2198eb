"""The escalation state machine: vote, gate, escalate, human consensus.

Items advance LowLevel -> HighLevel -> HumanQueue; each automated stage
finalizes only when the strict-majority vote accepts both fields AND the
quality score clears the threshold. Human-queue items finalize when two
expert records agree exactly, or via an explicit consensus submission
after a flagged discussion.

The gate's kappa is computed over a sliding window of recently processed
items (kappa needs a batch; the window size is configurable and a window
of 1 reduces kappa to per-item agreement via the degenerate-table
convention).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..labels import BIG_FIVE, EMOTIONS
from .agreement import entropy_score, fleiss_kappa, kappa, quality_score
from .records import (
    AnnotationRecord,
    EscalationItem,
    QualityReport,
    Stage,
    StageRecord,
    VoteResult,
)
from .voting import majority_vote


class StageError(ValueError):
    """An operation was applied at the wrong escalation stage."""


@dataclass
class PipelineConfig:
    quality_weights: tuple[float, float, float] = (0.5, 0.25, 0.25)
    quality_threshold: float = 0.7
    entropy_as_certainty: bool = True
    kappa_batch_size: int = 50
    kappa_mode: str = "cohen"  # or "fleiss"
    min_experts: int = 2

    def __post_init__(self) -> None:
        if self.kappa_mode not in ("cohen", "fleiss"):
            raise ValueError(f"unknown kappa mode {self.kappa_mode!r}")
        if self.kappa_batch_size < 1:
            raise ValueError("kappa_batch_size must be >= 1")
        if self.min_experts < 2:
            raise ValueError("human consensus needs at least two experts")


def vote_entropy(vote: VoteResult) -> float:
    """Mean of the two fields' normalized vote entropies."""
    n = vote.tallies["n"]
    personality_fracs = [
        vote.tallies["personality"].get(label, 0) / n for label in BIG_FIVE
    ]
    personality_entropy = entropy_score(personality_fracs, len(BIG_FIVE))
    label_entropies = []
    for label in EMOTIONS:
        p = vote.tallies["emotions"].get(label, 0) / n
        label_entropies.append(entropy_score((p, 1.0 - p), 2))
    emotion_entropy = sum(label_entropies) / len(label_entropies)
    return (emotion_entropy + personality_entropy) / 2.0


class EscalationPipeline:
    """Processes items through the staged annotation flow."""

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self._window: deque[list[AnnotationRecord]] = deque(
            maxlen=self.config.kappa_batch_size
        )

    # ------------------------------------------------------------------
    # gate statistics

    def _gate_kappa(self, new_records: list[AnnotationRecord]) -> float:
        window_records = [r for batch in self._window for r in batch] + new_records
        kappa_fn = kappa if self.config.kappa_mode == "cohen" else fleiss_kappa
        emotion = kappa_fn(window_records, "emotion")
        personality = kappa_fn(window_records, "personality")
        return (emotion + personality) / 2.0

    def _gate(self, new_records: list[AnnotationRecord]) -> tuple[VoteResult, QualityReport]:
        vote = majority_vote(new_records)
        gate_kappa = self._gate_kappa(new_records)
        entropy_norm = vote_entropy(vote)
        mean_confidence = sum(r.confidence for r in new_records) / len(new_records)
        quality = quality_score(
            gate_kappa,
            entropy_norm,
            mean_confidence,
            weights=self.config.quality_weights,
            threshold=self.config.quality_threshold,
            entropy_as_certainty=self.config.entropy_as_certainty,
        )
        return vote, quality

    # ------------------------------------------------------------------
    # stage transitions

    def step(self, item: EscalationItem, new_records: list[AnnotationRecord]) -> EscalationItem:
        """Run one automated annotation round on a LowLevel/HighLevel item."""
        if item.stage is Stage.FINAL:
            raise StageError(f"{item.item_id}: cannot step a finalized item")
        if item.stage is Stage.HUMAN_QUEUE:
            raise StageError(
                f"{item.item_id}: human-queue items finalize via expert consensus"
            )
        wrong = [r.item_id for r in new_records if r.item_id != item.item_id]
        if wrong:
            raise ValueError(f"{item.item_id}: records for other items {wrong}")

        vote, quality = self._gate(new_records)
        self._window.append(list(new_records))
        item.records.extend(new_records)
        item.history.append(StageRecord(stage=item.stage, vote=vote, quality=quality))

        if vote.passed and quality.passed:
            item.final_emotions = vote.emotions
            item.final_personality = vote.personality
            item.stage = Stage.FINAL
        elif item.stage is Stage.LOW_LEVEL:
            item.stage = Stage.HIGH_LEVEL
        else:
            item.stage = Stage.HUMAN_QUEUE
        return item

    def human_consensus(
        self, item: EscalationItem, expert_records: list[AnnotationRecord]
    ) -> EscalationItem:
        """Finalize a human-queue item when the experts agree exactly."""
        if item.stage is not Stage.HUMAN_QUEUE:
            raise StageError(f"{item.item_id}: item is not in the human queue")
        if len(expert_records) < self.config.min_experts:
            raise ValueError(
                f"{item.item_id}: consensus needs >= {self.config.min_experts} experts"
            )
        new = [r for r in expert_records if r not in item.records]
        item.records.extend(new)
        label_sets = {(tuple(sorted(r.emotions)), r.personality) for r in expert_records}
        if len(label_sets) == 1:
            emotions, personality = next(iter(label_sets))
            item.final_emotions = tuple(e for e in EMOTIONS if e in emotions)
            item.final_personality = personality
            item.stage = Stage.FINAL
            item.needs_discussion = False
        else:
            item.needs_discussion = True
        return item

    def resolve_discussion(
        self, item: EscalationItem, consensus_record: AnnotationRecord
    ) -> EscalationItem:
        """Apply the explicit post-discussion consensus submission."""
        if item.stage is not Stage.HUMAN_QUEUE:
            raise StageError(f"{item.item_id}: item is not in the human queue")
        if not item.needs_discussion:
            raise StageError(f"{item.item_id}: no discussion pending")
        if not consensus_record.is_consensus:
            raise ValueError(f"{item.item_id}: record is not flagged as consensus")
        item.records.append(consensus_record)
        item.final_emotions = consensus_record.emotions
        item.final_personality = consensus_record.personality
        item.needs_discussion = False
        item.stage = Stage.FINAL
        return item
