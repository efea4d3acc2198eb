"""Loss primitives: cross entropy, binary cross entropy and mean squared error.

Predictions enter as probabilities (post softmax/sigmoid) rather than
logits, because the per-modality prediction errors feed the uncertainty
alignment term and must match the categorical cross entropy exactly.
``LOG_EPS`` guards the logs on fully confident predictions.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ContractError, ShapeError, Tensor

LOG_EPS = 1e-12
ROW_SUM_TOL = 1e-6


def _check_distribution_rows(pred: Tensor) -> None:
    sums = pred.data.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
        worst = float(np.abs(sums - 1.0).max())
        raise ContractError(
            f"prediction rows must sum to 1 (max deviation {worst:.3g})"
        )
    if np.any(pred.data < 0.0):
        raise ContractError("prediction rows must be nonnegative")


def cross_entropy_rows(pred: Tensor, target_one_hot: np.ndarray) -> Tensor:
    """Per-row cross entropy, shape [batch, 1]; inputs are probability rows."""
    pred = Tensor._lift(pred)
    target = np.asarray(target_one_hot, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ShapeError(
            f"cross_entropy: pred {pred.data.shape} vs target {target.shape}"
        )
    _check_distribution_rows(pred)
    log_pred = (pred + LOG_EPS).log()
    return -(log_pred * target).sum(axis=1, keepdims=True)


def cross_entropy(pred: Tensor, target_one_hot: np.ndarray) -> Tensor:
    """Mean over the batch of -sum(target * log(pred + eps))."""
    return cross_entropy_rows(pred, target_one_hot).mean()


def binary_cross_entropy_rows(pred: Tensor, target_multi_hot: np.ndarray) -> Tensor:
    """Per-row Bernoulli cross entropy averaged over the labels, shape [batch, 1]."""
    pred = Tensor._lift(pred)
    target = np.asarray(target_multi_hot, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ShapeError(
            f"binary_cross_entropy: pred {pred.data.shape} vs target {target.shape}"
        )
    if np.any(pred.data < 0.0) or np.any(pred.data > 1.0):
        raise ContractError("binary predictions must lie in [0, 1]")
    pos = (pred + LOG_EPS).log() * target
    neg = ((1.0 - pred) + LOG_EPS).log() * (1.0 - target)
    return -(pos + neg).mean(axis=1, keepdims=True)


def binary_cross_entropy(pred: Tensor, target_multi_hot: np.ndarray) -> Tensor:
    """Mean over batch and labels of the Bernoulli cross entropy."""
    return binary_cross_entropy_rows(pred, target_multi_hot).mean()


def mse(a: Tensor, b) -> Tensor:
    """Mean of squared elementwise differences."""
    a = Tensor._lift(a)
    b = Tensor._lift(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mse: shapes differ, {a.data.shape} vs {b.data.shape}")
    return ((a - b) ** 2).mean()
