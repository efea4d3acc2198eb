"""scikit-learn style estimator facade over the fusion model.

`ReliabilityFusionClassifier` exposes the training loop through the
familiar fit/predict/predict_proba surface (get_params/set_params/clone
come from BaseEstimator), so the model drops into sklearn-style
pipelines and model-selection tooling. X is a list of `Sample` records;
labels ride inside the samples, so `y` is accepted and ignored.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Sample
from .labels import BIG_FIVE, EMOTIONS, MODALITIES, TASKS
from .training import TrainConfig, evaluate, feature_dims_of, predict_proba, train


def validate_samples(X, feature_dims=None) -> list[Sample]:
    """Check that X is a nonempty list of well-formed samples with
    consistent per-modality feature dimensions; returns X unchanged."""
    if not isinstance(X, (list, tuple)) or not X:
        raise ValueError("X must be a nonempty list of Sample records")
    for i, s in enumerate(X):
        if not isinstance(s, Sample):
            raise TypeError(f"X[{i}] is {type(s).__name__}, expected Sample")
    dims = feature_dims or feature_dims_of(list(X))
    for s in X:
        for m in MODALITIES:
            seq = s.features[m]
            if seq.ndim != 2 or seq.shape[0] < 1:
                raise ValueError(f"sample {s.id}: {m.value} features must be [T>=1, dim]")
            if seq.shape[1] != dims[m]:
                raise ValueError(
                    f"sample {s.id}: {m.value} feature dim {seq.shape[1]} != {dims[m]}"
                )
    return list(X)


class ReliabilityFusionClassifier(BaseEstimator):
    """Joint three-task classifier with uncertainty-weighted fusion."""

    def __init__(
        self,
        hidden_dim: int = 64,
        epochs: int = 60,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        optimizer: str = "adam",
        fusion_strategy: str = "reliability",
        beta: float = 1.0,
        lambda1: float = 0.1,
        lambda2: float = 0.1,
        emotion_head: str = "sigmoid",
        emotion_threshold: float = 0.5,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.fusion_strategy = fusion_strategy
        self.beta = beta
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.emotion_head = emotion_head
        self.emotion_threshold = emotion_threshold
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            optimizer=self.optimizer,
            fusion_strategy=self.fusion_strategy,
            hidden_dim=self.hidden_dim,
            beta=self.beta,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            emotion_head=self.emotion_head,
            emotion_threshold=self.emotion_threshold,
        )

    def fit(self, X, y=None):
        samples = validate_samples(X)
        config = self._config()
        result = train(samples, config)
        self.model_ = result.model
        self.trace_ = result.trace
        self.config_ = config
        self.feature_dims_ = feature_dims_of(samples)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict")

    def predict_proba(self, X) -> dict[str, np.ndarray]:
        """Per-task probability matrices aligned with X."""
        self._check_fitted()
        samples = validate_samples(X, self.feature_dims_)
        return predict_proba(
            self.model_, samples, strategy=self.config_.effective_strategy()
        )

    def predict(self, X) -> dict[str, object]:
        """Readable labels: 0/1 deception, emotion label tuples, Big Five names."""
        proba = self.predict_proba(X)
        emotion_sets = [
            tuple(e for e, p in zip(EMOTIONS, row) if p >= self.emotion_threshold)
            for row in proba["emotion"]
        ]
        return {
            "deception": proba["deception"].argmax(axis=1),
            "emotion": emotion_sets,
            "personality": np.array(
                [BIG_FIVE[i] for i in proba["personality"].argmax(axis=1)]
            ),
        }

    def score(self, X, y=None) -> float:
        """Mean accuracy across the three tasks."""
        self._check_fitted()
        samples = validate_samples(X, self.feature_dims_)
        report = evaluate(samples, self.model_, self.config_)
        return float(np.mean([report[task].accuracy for task in TASKS]))
