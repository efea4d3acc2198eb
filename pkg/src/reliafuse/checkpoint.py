"""Model checkpoints: versioned JSON of named parameter tensors plus config.

Floats serialize via repr (shortest round-trip), so save/load is exact and
checkpoints written with the same seed and config are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .labels import Modality
from .model import FusionConfig, ReliabilityFusionModel

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint file is malformed or does not match the model."""


def config_to_dict(config: FusionConfig) -> dict:
    return {
        "feature_dims": {m.value: d for m, d in config.feature_dims.items()},
        "hidden_dim": config.hidden_dim,
        "beta": config.beta,
        "lambda1": config.lambda1,
        "lambda2": config.lambda2,
        "emotion_head": config.emotion_head,
    }


def config_from_dict(payload: dict) -> FusionConfig:
    return FusionConfig(
        feature_dims={Modality(k): int(v) for k, v in payload["feature_dims"].items()},
        hidden_dim=int(payload["hidden_dim"]),
        beta=float(payload["beta"]),
        lambda1=float(payload["lambda1"]),
        lambda2=float(payload["lambda2"]),
        emotion_head=payload.get("emotion_head", "sigmoid"),
    )


def save_model(model: ReliabilityFusionModel, path: str | Path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(model.config),
        "parameters": {
            name: {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
            for name, p in sorted(model.named_parameters().items())
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_model(path: str | Path) -> ReliabilityFusionModel:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {payload.get('format_version')!r}"
        )
    config = config_from_dict(payload["config"])
    model = ReliabilityFusionModel(config, seed=0)
    params = model.named_parameters()
    stored = payload["parameters"]
    missing = sorted(set(params) - set(stored))
    extra = sorted(set(stored) - set(params))
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match model (missing {missing}, extra {extra})"
        )
    for name, p in params.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: checkpoint {shape} vs model {p.data.shape}"
            )
        p.data = np.array(entry["data"], dtype=np.float64).reshape(shape)
        p.zero_grad()
    return model
