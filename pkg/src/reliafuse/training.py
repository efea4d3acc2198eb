"""Training loop, optimizers and dataset evaluation.

A run is fully determined by its config and seed: parameter init, batch
shuffling and every numeric op are seeded or deterministic, so repeated
runs produce bitwise-identical loss traces and checkpoints.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .autodiff import Parameter
from .data import DatasetError, Sample, encode_targets, group_by_shape, stack_features
from .labels import MODALITIES, TASKS, Modality
from .metrics import TaskMetrics, classification_metrics, multilabel_metrics
from .model import (
    FUSION_STRATEGIES,
    FusionConfig,
    ReliabilityFusionModel,
)

OPTIMIZERS = ("sgd", "adam")


class NonFiniteLossError(RuntimeError):
    """Training aborted because a loss term left the finite range."""


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    fusion_strategy: str = "reliability"
    disable_ali: bool = False
    disable_sort: bool = False
    disable_rel: bool = False
    hidden_dim: int = 64
    beta: float = 1.0
    lambda1: float = 0.1
    lambda2: float = 0.1
    emotion_head: str = "sigmoid"
    emotion_threshold: float = 0.5
    aux_supervision: float = 1.0
    active_tasks: tuple[str, ...] = TASKS

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.fusion_strategy not in FUSION_STRATEGIES:
            raise ValueError(f"unknown fusion strategy {self.fusion_strategy!r}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split}")
        unknown = [t for t in self.active_tasks if t not in TASKS]
        if unknown:
            raise ValueError(f"unknown tasks {unknown}")
        self.split = tuple(self.split)
        self.active_tasks = tuple(self.active_tasks)

    def effective_strategy(self) -> str:
        return "uniform" if self.disable_rel else self.fusion_strategy

    def fusion_config(self, feature_dims: dict[Modality, int]) -> FusionConfig:
        return FusionConfig(
            feature_dims=feature_dims,
            hidden_dim=self.hidden_dim,
            beta=self.beta,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            emotion_head=self.emotion_head,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(payload)
        for key in ("split", "active_tasks"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        text = Path(path).read_text()
        if str(path).endswith(".json"):
            return cls.from_dict(json.loads(text))
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        return cls.from_dict(tomllib.loads(text))


# ----------------------------------------------------------------------
# optimizers


class Sgd:
    def __init__(self, params: list[Parameter], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            p.data = p.data - self.lr * p.grad


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / bias1
            v_hat = self.v[i] / bias2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name: str, params: list[Parameter], lr: float):
    return Adam(params, lr) if name == "adam" else Sgd(params, lr)


# ----------------------------------------------------------------------
# training


@dataclass
class EpochStats:
    epoch: int
    loss: float
    classification: float
    alignment: float
    sorting: float
    auxiliary: float
    weight_mean: tuple[float, float, float]
    weight_min: tuple[float, float, float]
    weight_max: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "classification": self.classification,
            "alignment": self.alignment,
            "sorting": self.sorting,
            "auxiliary": self.auxiliary,
            "weight_mean": list(self.weight_mean),
            "weight_min": list(self.weight_min),
            "weight_max": list(self.weight_max),
        }


@dataclass
class TrainResult:
    model: ReliabilityFusionModel
    config: TrainConfig
    trace: list[EpochStats] = field(default_factory=list)


def _check_finite(breakdown) -> None:
    for term, tensor in (
        ("classification", breakdown.classification),
        ("alignment", breakdown.alignment),
        ("sorting", breakdown.sorting),
        ("total", breakdown.total),
    ):
        if not np.isfinite(tensor.data).all():
            raise NonFiniteLossError(
                f"loss term '{term}' became non-finite; aborting the run"
            )


def feature_dims_of(samples: list[Sample]) -> dict[Modality, int]:
    return {m: samples[0].features[m].shape[1] for m in MODALITIES}


def train(samples: list[Sample], config: TrainConfig) -> TrainResult:
    """Optimize the full objective over the sample list; deterministic per seed."""
    if not samples:
        raise DatasetError("cannot train on an empty dataset")
    dims = feature_dims_of(samples)
    model = ReliabilityFusionModel(config.fusion_config(dims), seed=config.seed)
    optimizer = make_optimizer(config.optimizer, model.parameters(), config.learning_rate)
    rng = np.random.default_rng(config.seed)
    strategy = config.effective_strategy()
    lam1 = 0.0 if config.disable_ali else config.lambda1
    lam2 = 0.0 if config.disable_sort else config.lambda2

    trace: list[EpochStats] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        epoch_terms = np.zeros(5)
        epoch_count = 0
        w_sum = np.zeros(3)
        w_min = np.full(3, np.inf)
        w_max = np.full(3, -np.inf)
        for start in range(0, len(samples), config.batch_size):
            chunk = [samples[i] for i in order[start : start + config.batch_size]]
            model.zero_grad()
            batch_loss = None
            batch_terms = np.zeros(5)
            for group in group_by_shape(chunk):
                out = model.forward_batch(stack_features(group), strategy=strategy)
                targets = encode_targets(group)
                breakdown = model.total_loss(
                    out,
                    targets,
                    active_tasks=config.active_tasks,
                    lambda1=lam1,
                    lambda2=lam2,
                )
                _check_finite(breakdown)
                aux = model.aux_classification_loss(
                    out, targets, active_tasks=config.active_tasks
                )
                if not np.isfinite(aux.data).all():
                    raise NonFiniteLossError(
                        "loss term 'auxiliary' became non-finite; aborting the run"
                    )
                share = len(group) / len(chunk)
                term = (breakdown.total + config.aux_supervision * aux) * share
                batch_loss = term if batch_loss is None else batch_loss + term
                batch_terms += share * np.array(
                    [
                        float(breakdown.total.data),
                        float(breakdown.classification.data),
                        float(breakdown.alignment.data),
                        float(breakdown.sorting.data),
                        float(aux.data),
                    ]
                )
                w = out.weights.data
                w_sum += w.sum(axis=0)
                w_min = np.minimum(w_min, w.min(axis=0))
                w_max = np.maximum(w_max, w.max(axis=0))
            batch_loss.backward()
            optimizer.step()
            epoch_terms += batch_terms * len(chunk)
            epoch_count += len(chunk)
        epoch_terms /= epoch_count
        trace.append(
            EpochStats(
                epoch=epoch,
                loss=epoch_terms[0],
                classification=epoch_terms[1],
                alignment=epoch_terms[2],
                sorting=epoch_terms[3],
                auxiliary=epoch_terms[4],
                weight_mean=tuple(w_sum / epoch_count),
                weight_min=tuple(w_min),
                weight_max=tuple(w_max),
            )
        )
    return TrainResult(model=model, config=config, trace=trace)


# ----------------------------------------------------------------------
# evaluation


def predict_proba(
    model: ReliabilityFusionModel,
    samples: list[Sample],
    strategy: str = "reliability",
    chunk_size: int = 256,
) -> dict[str, np.ndarray]:
    """Per-task probability matrices aligned with the sample order."""
    if not samples:
        raise DatasetError("cannot evaluate an empty sample list")
    rows = {task: [None] * len(samples) for task in TASKS}
    index = {id(s): i for i, s in enumerate(samples)}
    for group in group_by_shape(samples):
        for start in range(0, len(group), chunk_size):
            chunk = group[start : start + chunk_size]
            out = model.forward_batch(stack_features(chunk), strategy=strategy)
            for task in TASKS:
                probs = out.predictions[task].data
                for k, s in enumerate(chunk):
                    rows[task][index[id(s)]] = probs[k]
    return {task: np.stack(vals) for task, vals in rows.items()}


def evaluate(
    samples: list[Sample],
    model: ReliabilityFusionModel,
    config: TrainConfig,
) -> dict[str, TaskMetrics]:
    """Per-task metrics; argmax readout for single-label tasks, thresholded emotion."""
    proba = predict_proba(model, samples, strategy=config.effective_strategy())
    targets = encode_targets(samples)
    report: dict[str, TaskMetrics] = {}

    dec_true = targets["deception"].argmax(axis=1)
    dec_pred = proba["deception"].argmax(axis=1)
    report["deception"] = classification_metrics(dec_true, dec_pred, proba["deception"], 2)

    report["emotion"] = multilabel_metrics(
        targets["emotion"], proba["emotion"], config.emotion_threshold
    )

    per_true = targets["personality"].argmax(axis=1)
    per_pred = proba["personality"].argmax(axis=1)
    report["personality"] = classification_metrics(
        per_true, per_pred, proba["personality"], 5
    )
    return report


def single_task_config(config: TrainConfig, task: str) -> TrainConfig:
    """A copy of `config` with only one task's losses active."""
    return replace(config, active_tasks=(task,))
