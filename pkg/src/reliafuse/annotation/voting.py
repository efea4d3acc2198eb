"""Strict-majority voting over annotation records.

An emotion label is accepted when its tally exceeds half the records; the
personality label is accepted when the top-voted label does. Two labels
can never both exceed half, so no personality tie rule is needed.
"""

from __future__ import annotations

from collections import Counter

from ..labels import BIG_FIVE, EMOTIONS
from .records import AnnotationRecord, VoteResult


class InsufficientAnnotatorsError(ValueError):
    """Voting requires at least two annotation records."""


def majority_vote(records: list[AnnotationRecord]) -> VoteResult:
    n = len(records)
    if n < 2:
        raise InsufficientAnnotatorsError(f"need >= 2 records to vote, got {n}")
    item_ids = {r.item_id for r in records}
    if len(item_ids) != 1:
        raise ValueError(f"vote mixes records from different items: {sorted(item_ids)}")

    emotion_counts = Counter()
    for r in records:
        emotion_counts.update(r.emotions)
    accepted_emotions = tuple(e for e in EMOTIONS if emotion_counts[e] * 2 > n)

    personality_counts = Counter(r.personality for r in records)
    top_label, top_votes = max(
        personality_counts.items(), key=lambda kv: (kv[1], -BIG_FIVE.index(kv[0]))
    )
    personality_passed = top_votes * 2 > n

    return VoteResult(
        emotions=accepted_emotions,
        personality=top_label if personality_passed else None,
        emotions_passed=bool(accepted_emotions),
        personality_passed=personality_passed,
        tallies={
            "n": n,
            "emotions": {e: emotion_counts[e] for e in EMOTIONS if emotion_counts[e]},
            "personality": dict(personality_counts),
        },
    )
