"""Comparison harnesses: fusion strategies, component ablation, joint vs single.

Each harness runs full train+evaluate cycles under a shared seed and emits
rows suitable for CSV tables and JSON reports. Strategy rows are labeled
None/Text/Video/Audio/Ours (no weighting, the three dominant-modality
baselines, and reliability weighting).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

from .data import Sample
from .labels import TASKS
from .metrics import TaskMetrics
from .training import TrainConfig, TrainResult, evaluate, train

METRIC_COLUMNS = ("accuracy", "auc", "precision", "recall", "f1")

STRATEGY_LABELS = {
    "uniform": "None",
    "text-dominant": "Text",
    "video-dominant": "Video",
    "audio-dominant": "Audio",
    "reliability": "Ours",
}

COMPONENT_ROWS = ("full", "w/o Ali", "w/o Sort", "w/o Rel")


@dataclass
class ExperimentRow:
    label: str
    task: str
    metrics: TaskMetrics

    def to_record(self) -> dict:
        rec = {"label": self.label, "task": self.task}
        rec.update(self.metrics.as_percent())
        return rec


@dataclass
class ExperimentResult:
    rows: list[ExperimentRow]
    runs: dict[str, TrainResult]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["label", "task", *METRIC_COLUMNS])
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row.to_record())

    def to_records(self) -> list[dict]:
        return [row.to_record() for row in self.rows]


def _train_and_report(
    train_samples: list[Sample],
    eval_samples: list[Sample],
    config: TrainConfig,
    label: str,
) -> tuple[list[ExperimentRow], TrainResult]:
    result = train(train_samples, config)
    report = evaluate(eval_samples, result.model, config)
    rows = [ExperimentRow(label=label, task=task, metrics=report[task]) for task in TASKS]
    return rows, result


def run_fusion_ablation(
    train_samples: list[Sample],
    eval_samples: list[Sample],
    base_config: TrainConfig,
) -> ExperimentResult:
    """One full train+evaluate per fusion strategy, all under the base seed."""
    rows: list[ExperimentRow] = []
    runs: dict[str, TrainResult] = {}
    for strategy, label in STRATEGY_LABELS.items():
        config = replace(base_config, fusion_strategy=strategy, disable_rel=False)
        strat_rows, result = _train_and_report(train_samples, eval_samples, config, label)
        rows.extend(strat_rows)
        runs[label] = result
    return ExperimentResult(rows=rows, runs=runs)


def run_component_ablation(
    train_samples: list[Sample],
    eval_samples: list[Sample],
    base_config: TrainConfig,
) -> ExperimentResult:
    """Rows full / w/o Ali / w/o Sort / w/o Rel, sharing the base seed."""
    variants = {
        "full": base_config,
        "w/o Ali": replace(base_config, disable_ali=True),
        "w/o Sort": replace(base_config, disable_sort=True),
        "w/o Rel": replace(base_config, disable_rel=True),
    }
    rows: list[ExperimentRow] = []
    runs: dict[str, TrainResult] = {}
    for label, config in variants.items():
        variant_rows, result = _train_and_report(train_samples, eval_samples, config, label)
        rows.extend(variant_rows)
        runs[label] = result
    return ExperimentResult(rows=rows, runs=runs)


def run_joint_vs_single(
    train_samples: list[Sample],
    eval_samples: list[Sample],
    base_config: TrainConfig,
) -> ExperimentResult:
    """Joint objective vs one single-task run per task, same split and seed."""
    rows: list[ExperimentRow] = []
    runs: dict[str, TrainResult] = {}
    joint_rows, joint_result = _train_and_report(
        train_samples, eval_samples, replace(base_config, active_tasks=TASKS), "joint"
    )
    runs["joint"] = joint_result
    for task in TASKS:
        config = replace(base_config, active_tasks=(task,))
        result = train(train_samples, config)
        report = evaluate(eval_samples, result.model, config)
        rows.append(ExperimentRow(label="single", task=task, metrics=report[task]))
        runs[f"single:{task}"] = result
    rows.extend(joint_rows)
    return ExperimentResult(rows=rows, runs=runs)
