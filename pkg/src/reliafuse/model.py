"""Reliability-weighted multimodal fusion model.

Per modality, two GRU encoders map the feature sequence to a Gaussian
embedding (mu, sigma): mu is the modality representation, sigma (softplus
of the second GRU's state, so strictly positive) quantifies how unreliable
that representation is. Fusion weights are the normalized inverse of the
per-modality scalar uncertainties, the fused vector is the weighted sum of
the mu vectors, and three stacked FC heads produce the task predictions.

Two regularizers tie the uncertainties to reality: an alignment term
(squared gap between each modality's scalar uncertainty and its auxiliary
prediction error) and a sorting hinge (pairwise uncertainty gaps must not
exceed beta times the corresponding weight gaps).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .autodiff import Parameter, ShapeError, Tensor, concat, softmax
from .labels import MODALITIES, TASK_DIMS, TASKS, Modality
from .layers import GruCell, Linear
from .losses import binary_cross_entropy_rows, cross_entropy_rows

FUSION_STRATEGIES = (
    "reliability",
    "uniform",
    "text-dominant",
    "video-dominant",
    "audio-dominant",
)

DOMINANT_WEIGHT = 0.8
MINOR_WEIGHT = 0.1


class PositivityError(ValueError):
    """An uncertainty value that must be strictly positive was not."""


@dataclass
class FusionConfig:
    """Model hyperparameters; defaults are exposed, not prescribed."""

    feature_dims: dict[Modality, int]
    hidden_dim: int = 64
    beta: float = 1.0
    lambda1: float = 0.1
    lambda2: float = 0.1
    emotion_head: str = "sigmoid"  # "softmax" restores a single-label readout

    def __post_init__(self) -> None:
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.beta < 0 or self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("beta, lambda1 and lambda2 must be nonnegative")
        if self.emotion_head not in ("sigmoid", "softmax"):
            raise ValueError(f"unknown emotion_head {self.emotion_head!r}")
        missing = [m for m in MODALITIES if m not in self.feature_dims]
        if missing:
            raise ValueError(f"feature_dims missing modalities: {missing}")


@dataclass
class GaussianEmbedding:
    """Per-modality (mu, sigma) pair; sigma entries are strictly positive."""

    mu: Tensor
    sigma: Tensor


@dataclass
class FusionWeights:
    """Convex weights over the three modalities, anti-monotone in uncertainty."""

    w: dict[Modality, float]

    def __post_init__(self) -> None:
        total = sum(self.w[m] for m in MODALITIES)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must sum to 1, got {total!r}")
        if any(self.w[m] <= 0.0 for m in MODALITIES):
            raise ValueError("fusion weights must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.w[m] for m in MODALITIES])


def fusion_weights(sigmas: Mapping[Modality, float]) -> FusionWeights:
    """Normalized inverse uncertainties: w_m = (1/sigma_m) / sum_j (1/sigma_j)."""
    for m in MODALITIES:
        if sigmas[m] <= 0.0:
            raise PositivityError(f"sigma for {m.value} must be > 0, got {sigmas[m]!r}")
    sig = Tensor(np.array([[float(sigmas[m]) for m in MODALITIES]]))
    w = fusion_weight_columns(sig)
    return FusionWeights({m: float(w.data[0, i]) for i, m in enumerate(MODALITIES)})


def fusion_weight_columns(sigma_cols: Tensor) -> Tensor:
    """Differentiable weight computation over a [batch, 3] uncertainty matrix."""
    inv = 1.0 / sigma_cols
    return inv / inv.sum(axis=1, keepdims=True)


def fuse(features: Mapping[Modality, np.ndarray], weights: FusionWeights) -> np.ndarray:
    """Convex combination of the per-modality representation vectors."""
    missing = [m for m in MODALITIES if m not in features]
    if missing:
        raise ShapeError(f"fuse: missing modalities {missing}")
    vectors = [np.asarray(features[m], dtype=np.float64) for m in MODALITIES]
    dims = {v.shape for v in vectors}
    if len(dims) != 1:
        raise ShapeError(f"fuse: modality vectors disagree in shape: {sorted(dims)}")
    out = np.zeros_like(vectors[0])
    for m, vec in zip(MODALITIES, vectors):
        out = out + weights.w[m] * vec
    return out


def scalar_uncertainty(embedding: GaussianEmbedding) -> float:
    """Mean of the sigma entries; strictly positive for a valid embedding."""
    return float(embedding.sigma.data.mean())


def alignment_loss(
    sigmas: Mapping[Modality, float],
    per_modality_preds: Mapping[Modality, np.ndarray],
    target_one_hot: np.ndarray,
) -> float:
    """Sum over modalities of the squared (sigma - prediction error) gap."""
    target = np.atleast_2d(np.asarray(target_one_hot, dtype=np.float64))
    total = 0.0
    for m in MODALITIES:
        pred = Tensor(np.atleast_2d(np.asarray(per_modality_preds[m], dtype=np.float64)))
        err = float(cross_entropy_rows(pred, target).data[0, 0])
        total += (float(sigmas[m]) - err) ** 2
    return total


def sorting_loss(
    sigmas: Mapping[Modality, float], weights: FusionWeights, beta: float
) -> float:
    """Hinge over all six ordered modality pairs (m, j), m != j."""
    sig = Tensor(np.array([[float(sigmas[m]) for m in MODALITIES]]))
    w = Tensor(np.array([[weights.w[m] for m in MODALITIES]]))
    return float(sorting_hinge_rows(sig, w, beta).data[0, 0])


def sorting_hinge_rows(sigma_cols: Tensor, weight_cols: Tensor, beta: float) -> Tensor:
    """Per-row sorting hinge over [batch, 3] uncertainty and weight matrices."""
    total = None
    for a in range(len(MODALITIES)):
        for b in range(len(MODALITIES)):
            if a == b:
                continue
            gap = sigma_cols[:, a : a + 1] - sigma_cols[:, b : b + 1]
            margin = weight_cols[:, a : a + 1] - weight_cols[:, b : b + 1]
            term = (gap - beta * margin).relu()
            total = term if total is None else total + term
    return total


@dataclass
class ForwardPass:
    """Everything a loss or a metric needs from one forward evaluation."""

    predictions: dict[str, Tensor]
    sigmas: dict[Modality, Tensor]  # scalar uncertainty per sample, [batch, 1]
    weights: Tensor  # [batch, 3] in MODALITIES order
    per_modality_preds: dict[str, dict[Modality, Tensor]]
    fused: Tensor  # [batch, hidden_dim]
    embeddings: dict[Modality, GaussianEmbedding] = field(default_factory=dict)

    def weight_map(self, row: int = 0) -> dict[Modality, float]:
        return {m: float(self.weights.data[row, i]) for i, m in enumerate(MODALITIES)}


@dataclass
class LossBreakdown:
    total: Tensor
    classification: Tensor
    alignment: Tensor
    sorting: Tensor


class TaskHead:
    """Three stacked fully connected layers with tanh between them."""

    def __init__(self, hidden_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        self.layers = [
            Linear(hidden_dim, hidden_dim, rng, f"{name}.fc1"),
            Linear(hidden_dim, hidden_dim, rng, f"{name}.fc2"),
            Linear(hidden_dim, out_dim, rng, f"{name}.fc3"),
        ]

    def __call__(self, x: Tensor) -> Tensor:
        h = self.layers[0](x).tanh()
        h = self.layers[1](h).tanh()
        return self.layers[2](h)

    def parameters(self) -> Iterator[Parameter]:
        for layer in self.layers:
            yield from layer.parameters()


class ReliabilityFusionModel:
    """Uncertainty-aware fusion network with joint task heads."""

    def __init__(self, config: FusionConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        h = config.hidden_dim
        self.gru_mu: dict[Modality, GruCell] = {}
        self.gru_sigma: dict[Modality, GruCell] = {}
        for m in MODALITIES:
            d = config.feature_dims[m]
            self.gru_mu[m] = GruCell(d, h, rng, f"gru_mu.{m.value}")
            self.gru_sigma[m] = GruCell(d, h, rng, f"gru_sigma.{m.value}")
        self.heads: dict[str, TaskHead] = {
            task: TaskHead(h, TASK_DIMS[task], rng, f"head.{task}") for task in TASKS
        }
        self.aux_heads: dict[str, dict[Modality, Linear]] = {
            task: {
                m: Linear(h, TASK_DIMS[task], rng, f"aux.{task}.{m.value}")
                for m in MODALITIES
            }
            for task in TASKS
        }

    # ------------------------------------------------------------------
    # parameters

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for m in MODALITIES:
            params.extend(self.gru_mu[m].parameters())
            params.extend(self.gru_sigma[m].parameters())
        for task in TASKS:
            params.extend(self.heads[task].parameters())
        for task in TASKS:
            for m in MODALITIES:
                params.extend(self.aux_heads[task][m].parameters())
        return params

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # ------------------------------------------------------------------
    # forward passes

    def estimate_uncertainty(self, features: np.ndarray, modality: Modality) -> GaussianEmbedding:
        """Map one [T, dim] feature sequence to its Gaussian embedding."""
        seq = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if seq.shape[1] != self.config.feature_dims[modality]:
            raise ShapeError(
                f"{modality.value} features have dim {seq.shape[1]}, "
                f"expected {self.config.feature_dims[modality]}"
            )
        mu = self.gru_mu[modality].forward(seq)
        sigma = self.gru_sigma[modality].forward(seq).softplus()
        return GaussianEmbedding(mu=mu, sigma=sigma)

    def _strategy_weights(self, batch: int, strategy: str) -> Tensor:
        if strategy == "uniform":
            return Tensor(np.full((batch, 3), 1.0 / 3.0))
        prefix = strategy.split("-")[0]
        row = [
            DOMINANT_WEIGHT if m.value == prefix else MINOR_WEIGHT for m in MODALITIES
        ]
        return Tensor(np.tile(row, (batch, 1)))

    def forward_batch(
        self, features: Mapping[Modality, np.ndarray], strategy: str = "reliability"
    ) -> ForwardPass:
        """Forward over equal-length sequences stacked as [batch, T, dim] per modality."""
        if strategy not in FUSION_STRATEGIES:
            raise ValueError(f"unknown fusion strategy {strategy!r}")
        missing = [m for m in MODALITIES if m not in features]
        if missing:
            raise ShapeError(f"forward requires all modalities, missing {missing}")
        embeddings: dict[Modality, GaussianEmbedding] = {}
        sigma_scalars: dict[Modality, Tensor] = {}
        batch = None
        for m in MODALITIES:
            stack = np.asarray(features[m], dtype=np.float64)
            if stack.ndim == 2:
                stack = stack[None, :, :]
            if stack.shape[2] != self.config.feature_dims[m]:
                raise ShapeError(
                    f"{m.value} features have dim {stack.shape[2]}, "
                    f"expected {self.config.feature_dims[m]}"
                )
            if batch is None:
                batch = stack.shape[0]
            elif stack.shape[0] != batch:
                raise ShapeError("modalities disagree on batch size")
            mu = self.gru_mu[m].forward_batch(stack)
            sigma = self.gru_sigma[m].forward_batch(stack).softplus()
            embeddings[m] = GaussianEmbedding(mu=mu, sigma=sigma)
            sigma_scalars[m] = sigma.mean(axis=1, keepdims=True)

        sigma_cols = _column_join([sigma_scalars[m] for m in MODALITIES])
        if strategy == "reliability":
            weights = fusion_weight_columns(sigma_cols)
        else:
            weights = self._strategy_weights(batch, strategy)

        fused = None
        for i, m in enumerate(MODALITIES):
            contrib = weights[:, i : i + 1] * embeddings[m].mu
            fused = contrib if fused is None else fused + contrib

        predictions: dict[str, Tensor] = {}
        for task in TASKS:
            logits = self.heads[task](fused)
            predictions[task] = self._readout(task, logits)

        per_modality_preds: dict[str, dict[Modality, Tensor]] = {}
        for task in TASKS:
            per_modality_preds[task] = {}
            for m in MODALITIES:
                logits = self.aux_heads[task][m](embeddings[m].mu)
                per_modality_preds[task][m] = self._readout(task, logits)

        return ForwardPass(
            predictions=predictions,
            sigmas=sigma_scalars,
            weights=weights,
            per_modality_preds=per_modality_preds,
            fused=fused,
            embeddings=embeddings,
        )

    def _readout(self, task: str, logits: Tensor) -> Tensor:
        if task == "emotion" and self.config.emotion_head == "sigmoid":
            return logits.sigmoid()
        return softmax(logits, axis=1)

    def forward(self, features: Mapping[Modality, np.ndarray], strategy: str = "reliability") -> ForwardPass:
        """Single-sample forward; each modality is one [T, dim] sequence."""
        stacked = {
            m: np.atleast_2d(np.asarray(features[m], dtype=np.float64))[None, :, :]
            for m in MODALITIES
            if m in features
        }
        return self.forward_batch(stacked, strategy=strategy)

    # ------------------------------------------------------------------
    # training objective

    def total_loss(
        self,
        out: ForwardPass,
        targets: Mapping[str, np.ndarray],
        active_tasks: tuple[str, ...] = TASKS,
        lambda1: float | None = None,
        lambda2: float | None = None,
    ) -> LossBreakdown:
        """Classification + alignment + sorting terms, averaged over the batch."""
        missing = [t for t in active_tasks if t not in targets]
        if missing:
            raise KeyError(f"targets missing tasks: {missing}")
        l1 = self.config.lambda1 if lambda1 is None else lambda1
        l2 = self.config.lambda2 if lambda2 is None else lambda2

        cls_terms = []
        for task in active_tasks:
            rows = self._task_error_rows(task, out.predictions[task], targets[task])
            cls_terms.append(rows.mean())
        l_cls = cls_terms[0]
        for term in cls_terms[1:]:
            l_cls = l_cls + term

        # per-modality error: mean of the active tasks' per-sample errors
        l_ali = None
        for m in MODALITIES:
            err = None
            for task in active_tasks:
                rows = self._task_error_rows(
                    task, out.per_modality_preds[task][m], targets[task]
                )
                err = rows if err is None else err + rows
            err = err * (1.0 / len(active_tasks))
            gap = (out.sigmas[m] - err) ** 2
            l_ali = gap if l_ali is None else l_ali + gap
        l_ali = l_ali.mean()

        l_sor = sorting_hinge_rows(
            _column_join([out.sigmas[m] for m in MODALITIES]), out.weights, self.config.beta
        ).mean()

        total = l_cls + l1 * l_ali + l2 * l_sor
        return LossBreakdown(total=total, classification=l_cls, alignment=l_ali, sorting=l_sor)

    def aux_classification_loss(
        self,
        out: ForwardPass,
        targets: Mapping[str, np.ndarray],
        active_tasks: tuple[str, ...] = TASKS,
    ) -> Tensor:
        """Supervision for the per-modality auxiliary heads.

        The alignment term only compares sigma against the auxiliary
        prediction errors; without direct supervision those heads never
        become predictors and the error signal carries no information, so
        the training loop adds this term to its optimized objective.
        """
        total = None
        for task in active_tasks:
            for m in MODALITIES:
                rows = self._task_error_rows(
                    task, out.per_modality_preds[task][m], targets[task]
                )
                term = rows.mean()
                total = term if total is None else total + term
        return total * (1.0 / (len(active_tasks) * len(MODALITIES)))

    def _task_error_rows(self, task: str, pred: Tensor, target: np.ndarray) -> Tensor:
        if task == "emotion":
            if self.config.emotion_head == "sigmoid":
                return binary_cross_entropy_rows(pred, target)
            # literal softmax readout: compare against the normalized label set
            target = np.asarray(target, dtype=np.float64)
            target = target / target.sum(axis=1, keepdims=True)
        return cross_entropy_rows(pred, target)


def _column_join(columns: list[Tensor]) -> Tensor:
    return concat(columns, axis=1)
