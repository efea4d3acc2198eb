"""Append-only event log with snapshots backing the adjudication queue.

Every state change is one JSONL event (enqueue or submit); replaying the
log through the same transition code reconstructs the store exactly, so a
killed process loses nothing. A snapshot captures the state at a sequence
number and later events replay on top of it.

Concurrency: per-item locks serialize mutations of one item; a global
lock serializes log appends (single log consumer).
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from pathlib import Path

from ..annotation.agreement import NoOverlapError, corpus_kappa
from ..annotation.pipeline import EscalationPipeline, PipelineConfig, StageError
from ..annotation.records import AnnotationRecord, EscalationItem, Stage

SNAPSHOT_EVERY_DEFAULT = 100


class StoreError(ValueError):
    """A submission or lookup violated the store's contract."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class QueueStore:
    def __init__(
        self,
        root: str | Path,
        pipeline_config: PipelineConfig | None = None,
        snapshot_every: int = SNAPSHOT_EVERY_DEFAULT,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "events.jsonl"
        self.snapshot_path = self.root / "snapshot.json"
        self.pipeline = EscalationPipeline(pipeline_config)
        self.snapshot_every = snapshot_every
        self._log_lock = threading.Lock()
        self._item_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._items: dict[str, EscalationItem] = {}
        self._order: list[str] = []
        # latest record per (item, expert); replaced records are kept for audit
        self._submissions: dict[str, dict[str, AnnotationRecord]] = defaultdict(dict)
        self._audit: dict[str, list[dict]] = defaultdict(list)
        self.seq = 0
        self._replay()

    # ------------------------------------------------------------------
    # persistence

    def _replay(self) -> None:
        start_seq = 0
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text())
            start_seq = snap["seq"]
            self.seq = snap["seq"]
            self._order = list(snap["order"])
            self._items = {
                key: EscalationItem.from_dict(value)
                for key, value in snap["items"].items()
            }
            self._submissions = defaultdict(dict)
            for item_id, per_expert in snap["submissions"].items():
                for expert, record in per_expert.items():
                    self._submissions[item_id][expert] = AnnotationRecord.from_dict(record)
            self._audit = defaultdict(list, {k: list(v) for k, v in snap["audit"].items()})
        if self.log_path.exists():
            with open(self.log_path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = json.loads(line)
                    if event["seq"] <= start_seq:
                        continue
                    self._apply(event)
                    self.seq = event["seq"]

    def _append_event(self, op: str, payload: dict) -> dict:
        with self._log_lock:
            self.seq += 1
            event = {"seq": self.seq, "op": op, "payload": payload}
            with open(self.log_path, "a") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
        if self.snapshot_every and self.seq % self.snapshot_every == 0:
            self.snapshot()
        return event

    def snapshot(self) -> None:
        state = self.state_dict()
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state, sort_keys=True))
        tmp.replace(self.snapshot_path)

    def state_dict(self) -> dict:
        return {
            "seq": self.seq,
            "order": list(self._order),
            "items": {key: item.to_dict() for key, item in sorted(self._items.items())},
            "submissions": {
                item_id: {expert: rec.to_dict() for expert, rec in sorted(per.items())}
                for item_id, per in sorted(self._submissions.items())
            },
            "audit": {k: v for k, v in sorted(self._audit.items())},
        }

    def state_json(self) -> str:
        return json.dumps(self.state_dict(), sort_keys=True)

    # ------------------------------------------------------------------
    # event application (shared by live calls and replay)

    def _apply(self, event: dict) -> dict:
        op = event["op"]
        payload = event["payload"]
        if op == "enqueue":
            item = EscalationItem.from_dict(payload)
            self._items[item.item_id] = item
            if item.item_id not in self._order:
                self._order.append(item.item_id)
            return {"status": "enqueued"}
        if op == "submit":
            record = AnnotationRecord.from_dict(payload)
            return self._apply_submission(record)
        raise StoreError("bad-event", f"unknown event op {op!r}")

    def _apply_submission(self, record: AnnotationRecord) -> dict:
        item = self._items[record.item_id]
        per_expert = self._submissions[record.item_id]
        if record.annotator_id in per_expert:
            self._audit[record.item_id].append(
                {
                    "replaced": per_expert[record.annotator_id].to_dict(),
                    "by": record.to_dict(),
                }
            )
        per_expert[record.annotator_id] = record

        if record.is_consensus and item.needs_discussion:
            self.pipeline.resolve_discussion(item, record)
            return {"status": "finalized"}
        latest = [per_expert[k] for k in sorted(per_expert)]
        if len(latest) < self.pipeline.config.min_experts:
            item.records.append(record)
            return {"status": "pending-second"}
        self.pipeline.human_consensus(item, latest)
        if item.stage is Stage.FINAL:
            return {"status": "finalized"}
        return {"status": "needs-discussion"}

    # ------------------------------------------------------------------
    # public operations

    def enqueue(self, item: EscalationItem) -> None:
        if item.item_id in self._items:
            raise StoreError("duplicate-item", f"item {item.item_id} already enqueued")
        self._append_event("enqueue", item.to_dict())
        self._apply({"seq": self.seq, "op": "enqueue", "payload": item.to_dict()})

    def get(self, item_id: str) -> EscalationItem:
        if item_id not in self._items:
            raise StoreError("unknown-item", f"no item {item_id}")
        return self._items[item_id]

    def list_queue(
        self,
        page: int = 1,
        page_size: int = 20,
        label: str | None = None,
    ) -> dict:
        """Human-queue items in enqueue order, paginated."""
        queue_ids = [
            item_id
            for item_id in self._order
            if self._items[item_id].stage is Stage.HUMAN_QUEUE
        ]
        if label:
            queue_ids = [
                item_id
                for item_id in queue_ids
                if any(
                    label in rec.emotions or label == rec.personality
                    for rec in self._items[item_id].records
                )
            ]
        total = len(queue_ids)
        start = (page - 1) * page_size
        entries = [self._items[i].to_dict() for i in queue_ids[start : start + page_size]]
        return {"items": entries, "page": page, "page_size": page_size, "total": total}

    def submit(self, item_id: str, record: AnnotationRecord) -> dict:
        if item_id not in self._items:
            raise StoreError("unknown-item", f"no item {item_id}")
        if record.item_id != item_id:
            raise StoreError("item-mismatch", "record item_id does not match URL")
        with self._item_locks[item_id]:
            item = self._items[item_id]
            if item.stage is Stage.FINAL:
                raise StoreError("already-final", f"item {item_id} is finalized")
            if item.stage is not Stage.HUMAN_QUEUE:
                raise StoreError(
                    "not-in-queue", f"item {item_id} is at stage {item.stage.value}"
                )
            try:
                event = self._append_event("submit", record.to_dict())
                result = self._apply(event)
            except StageError as exc:
                raise StoreError("stage-error", str(exc)) from exc
            result["item"] = item.to_dict()
            return result

    def stage_counts(self) -> dict[str, int]:
        counts = {stage.value: 0 for stage in Stage}
        for item in self._items.values():
            counts[item.stage.value] += 1
        return counts

    def report(self) -> dict:
        """Agreement, stage-count, quality and label-distribution summary."""
        finalized = [i for i in self._items.values() if i.stage is Stage.FINAL]
        expert_records = [
            rec
            for item in finalized
            for rec in self._submissions.get(item.item_id, {}).values()
        ]
        try:
            agreement = corpus_kappa(expert_records) if expert_records else None
        except (NoOverlapError, ValueError):
            agreement = None

        quality_scores = [
            h.quality.score for item in self._items.values() for h in item.history
        ]
        emotion_counts: dict[str, int] = defaultdict(int)
        personality_counts: dict[str, int] = defaultdict(int)
        for item in finalized:
            for e in item.final_emotions or ():
                emotion_counts[e] += 1
            if item.final_personality:
                personality_counts[item.final_personality] += 1

        def distribution(counts: dict[str, int]) -> dict[str, float]:
            total = sum(counts.values())
            if not total:
                return {}
            return {k: 100.0 * v / total for k, v in sorted(counts.items())}

        return {
            "corpus_kappa": agreement,
            "stage_counts": self.stage_counts(),
            "total_items": len(self._items),
            "quality_scores": {
                "count": len(quality_scores),
                "mean": sum(quality_scores) / len(quality_scores) if quality_scores else None,
                "min": min(quality_scores) if quality_scores else None,
                "max": max(quality_scores) if quality_scores else None,
            },
            "label_distribution": {
                "emotions": distribution(emotion_counts),
                "personality": distribution(personality_counts),
            },
        }
