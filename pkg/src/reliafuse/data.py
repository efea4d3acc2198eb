"""Datasets: sample records, feature-file IO, manifests, splits, synthesis.

A dataset is a JSONL manifest, one sample per line:

    {"id": ..., "subject_id": ..., "feature_paths": {"text": ..., "video": ...,
     "audio": ...}, "deception": 0|1, "emotions": [...], "personality": ...}

Feature paths are relative to the manifest. Each feature file is
little-endian binary: an 8-byte header (u32 step count, u32 dim) followed
by float32 values, row-major. Features are upcast to float64 in memory.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .labels import BIG_FIVE, EMOTIONS, MODALITIES, Modality

_HEADER = struct.Struct("<II")


class DatasetError(ValueError):
    """Manifest or feature file contents violate the dataset contract."""


@dataclass
class Sample:
    """One item: three feature sequences plus the three task labels."""

    id: str
    features: dict[Modality, np.ndarray]
    deception: int
    emotions: tuple[str, ...]
    personality: str
    subject_id: str | None = None

    def __post_init__(self) -> None:
        missing = [m for m in MODALITIES if m not in self.features]
        if missing:
            raise DatasetError(f"sample {self.id}: missing modalities {missing}")
        if self.deception not in (0, 1):
            raise DatasetError(f"sample {self.id}: deception must be 0 or 1")
        if not self.emotions:
            raise DatasetError(f"sample {self.id}: emotion label set is empty")
        bad = [e for e in self.emotions if e not in EMOTIONS]
        if bad:
            raise DatasetError(f"sample {self.id}: unknown emotions {bad}")
        if self.personality not in BIG_FIVE:
            raise DatasetError(f"sample {self.id}: unknown personality {self.personality!r}")


def write_features(path: str | Path, array: np.ndarray) -> None:
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim != 2:
        raise DatasetError(f"feature arrays must be 2-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_features(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetError(f"{path}: truncated feature file")
    steps, dim = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 4 * steps * dim
    if len(raw) != expected:
        raise DatasetError(
            f"{path}: expected {expected} bytes for {steps}x{dim}, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(steps, dim).astype(np.float64)


def save_dataset(samples: list[Sample], out_dir: str | Path) -> Path:
    """Write feature files plus a manifest.jsonl under out_dir; returns the manifest path."""
    out = Path(out_dir)
    features_dir = out / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for sample in samples:
            paths = {}
            for m in MODALITIES:
                rel = f"features/{sample.id}.{m.value}.bin"
                write_features(out / rel, sample.features[m])
                paths[m.value] = rel
            record = {
                "id": sample.id,
                "feature_paths": paths,
                "deception": sample.deception,
                "emotions": list(sample.emotions),
                "personality": sample.personality,
            }
            if sample.subject_id is not None:
                record["subject_id"] = sample.subject_id
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest


def load_dataset(manifest_path: str | Path) -> list[Sample]:
    manifest = Path(manifest_path)
    base = manifest.parent
    samples = []
    with open(manifest) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{manifest}:{lineno}: invalid JSON: {exc}") from exc
            features = {
                Modality(name): read_features(base / rel)
                for name, rel in record["feature_paths"].items()
            }
            samples.append(
                Sample(
                    id=record["id"],
                    features=features,
                    deception=int(record["deception"]),
                    emotions=tuple(record["emotions"]),
                    personality=record["personality"],
                    subject_id=record.get("subject_id"),
                )
            )
    if not samples:
        raise DatasetError(f"{manifest}: empty dataset")
    return samples


# ----------------------------------------------------------------------
# splits


def _stable_fraction(key: str) -> float:
    digest = hashlib.sha1(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def split_dataset(
    samples: list[Sample], ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Deterministic train/val/test split keyed on subject id when present.

    Split units (subjects, or sample ids when no subject ids exist) are
    ordered by a stable hash and cut at the ratio boundaries, so the split
    is independent of sample order and subject-disjoint by construction.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"split ratios must sum to 1, got {ratios}")
    keys = sorted(
        {s.subject_id if s.subject_id is not None else s.id for s in samples},
        key=lambda k: (_stable_fraction(k), k),
    )
    n = len(keys)
    n_train = round(ratios[0] * n)
    n_val = round(ratios[1] * n)
    assignment: dict[str, int] = {}
    for idx, key in enumerate(keys):
        if idx < n_train:
            assignment[key] = 0
        elif idx < n_train + n_val:
            assignment[key] = 1
        else:
            assignment[key] = 2
    buckets: tuple[list[Sample], list[Sample], list[Sample]] = ([], [], [])
    for s in samples:
        key = s.subject_id if s.subject_id is not None else s.id
        buckets[assignment[key]].append(s)
    return buckets


# ----------------------------------------------------------------------
# target encoding


def encode_targets(samples: list[Sample]) -> dict[str, np.ndarray]:
    """One-hot / multi-hot label matrices in task order, rows aligned with samples."""
    n = len(samples)
    dec = np.zeros((n, 2))
    emo = np.zeros((n, len(EMOTIONS)))
    per = np.zeros((n, len(BIG_FIVE)))
    for i, s in enumerate(samples):
        dec[i, s.deception] = 1.0
        for e in s.emotions:
            emo[i, EMOTIONS.index(e)] = 1.0
        per[i, BIG_FIVE.index(s.personality)] = 1.0
    return {"deception": dec, "emotion": emo, "personality": per}


def stack_features(samples: list[Sample]) -> dict[Modality, np.ndarray]:
    """Stack equal-length sequences into [batch, T, dim] arrays per modality."""
    stacked = {}
    for m in MODALITIES:
        shapes = {s.features[m].shape for s in samples}
        if len(shapes) != 1:
            raise DatasetError(
                f"cannot stack {m.value} features with differing shapes {sorted(shapes)}"
            )
        stacked[m] = np.stack([s.features[m] for s in samples])
    return stacked


def group_by_shape(samples: list[Sample]) -> list[list[Sample]]:
    """Split a batch into stackable groups of identical per-modality shapes."""
    groups: dict[tuple, list[Sample]] = {}
    for s in samples:
        key = tuple(s.features[m].shape for m in MODALITIES)
        groups.setdefault(key, []).append(s)
    return list(groups.values())


# ----------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticSpec:
    """Generator knobs for the label-driven Gaussian feature dataset.

    Every sample's latent label vector (deception one-hot, personality
    one-hot, emotion multi-hot) is projected into each modality by a fixed
    random matrix, giving class-conditional means; sequence steps add
    ambient Gaussian jitter. A "noisy" sample has modality sequences
    replaced wholesale by pure Gaussian noise of scale `noise_scale`:
    `noisy_modality` picks the victims -- a fixed modality, "rotate" (one
    victim drawn per sample) or "all-but-one" (one informative modality
    drawn per sample, the other two replaced) -- and `noise_prob` is the
    per-sample corruption probability.
    """

    n_samples: int = 120
    seq_len: int = 6
    feature_dims: dict[Modality, int] = field(
        default_factory=lambda: {m: 10 for m in MODALITIES}
    )
    class_sep: float = 1.0
    ambient_noise: float = 0.4
    noise_prob: float = 0.0
    noise_scale: float = 1.0
    noisy_modality: str = "rotate"  # text|video|audio|rotate|all-but-one|none
    emotion_rate: float = 0.35
    subject_count: int | None = None
    seed: int = 0


LATENT_DIM = 2 + 5 + 8


def make_synthetic_dataset(spec: SyntheticSpec) -> list[Sample]:
    rng = np.random.default_rng(spec.seed)
    projections = {
        m: rng.normal(size=(LATENT_DIM, spec.feature_dims[m])) / np.sqrt(LATENT_DIM)
        for m in MODALITIES
    }
    samples = []
    for i in range(spec.n_samples):
        deception = int(rng.integers(0, 2))
        personality_idx = int(rng.integers(0, len(BIG_FIVE)))
        emotion_mask = rng.random(len(EMOTIONS)) < spec.emotion_rate
        if not emotion_mask.any():
            emotion_mask[0] = True  # fall back to Neutral
        latent = np.zeros(LATENT_DIM)
        latent[deception] = 1.0
        latent[2 + personality_idx] = 1.0
        latent[7:] = emotion_mask.astype(float)
        latent *= spec.class_sep

        if spec.noisy_modality == "rotate":
            victims = {MODALITIES[int(rng.integers(0, len(MODALITIES)))]}
        elif spec.noisy_modality == "all-but-one":
            keeper = MODALITIES[int(rng.integers(0, len(MODALITIES)))]
            victims = {m for m in MODALITIES if m is not keeper}
        elif spec.noisy_modality == "none":
            victims = set()
        else:
            victims = {Modality(spec.noisy_modality)}
        corrupt = bool(victims) and rng.random() < spec.noise_prob

        features = {}
        for m in MODALITIES:
            mean = latent @ projections[m]
            seq = mean + spec.ambient_noise * rng.normal(
                size=(spec.seq_len, spec.feature_dims[m])
            )
            if corrupt and m in victims:
                seq = spec.noise_scale * rng.normal(
                    size=(spec.seq_len, spec.feature_dims[m])
                )
            features[m] = seq

        subject = (
            f"subj{i % spec.subject_count:04d}" if spec.subject_count else None
        )
        samples.append(
            Sample(
                id=f"synth{i:05d}",
                features=features,
                deception=deception,
                emotions=tuple(e for e, on in zip(EMOTIONS, emotion_mask) if on),
                personality=BIG_FIVE[personality_idx],
                subject_id=subject,
            )
        )
    return samples
