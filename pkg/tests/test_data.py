import numpy as np
import pytest

from reliafuse.data import (
    DatasetError,
    Sample,
    SyntheticSpec,
    group_by_shape,
    load_dataset,
    make_synthetic_dataset,
    read_features,
    save_dataset,
    split_dataset,
    stack_features,
    write_features,
)
from reliafuse.labels import BIG_FIVE, EMOTIONS, MODALITIES


def test_feature_file_round_trip(tmp_path):
    arr = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
    path = tmp_path / "x.bin"
    write_features(path, arr)
    back = read_features(path)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back.astype(np.float32), arr)
    # header: u32 steps, u32 dim, little endian
    raw = path.read_bytes()
    assert raw[:8] == (7).to_bytes(4, "little") + (5).to_bytes(4, "little")
    assert len(raw) == 8 + 4 * 7 * 5


def test_feature_file_truncation_detected(tmp_path):
    path = tmp_path / "bad.bin"
    write_features(path, np.zeros((2, 3), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(DatasetError, match="expected"):
        read_features(path)


def test_dataset_round_trip(tmp_path):
    samples = make_synthetic_dataset(SyntheticSpec(n_samples=6, seed=1, subject_count=3))
    manifest = save_dataset(samples, tmp_path)
    loaded = load_dataset(manifest)
    assert [s.id for s in loaded] == [s.id for s in samples]
    assert loaded[0].subject_id == samples[0].subject_id
    assert loaded[2].emotions == samples[2].emotions
    for m in MODALITIES:
        np.testing.assert_allclose(
            loaded[0].features[m], samples[0].features[m], atol=1e-6
        )


def test_sample_invariants_enforced():
    feats = {m: np.zeros((2, 3)) for m in MODALITIES}
    with pytest.raises(DatasetError, match="empty"):
        Sample(id="a", features=feats, deception=0, emotions=(), personality=BIG_FIVE[0])
    with pytest.raises(DatasetError, match="unknown emotions"):
        Sample(id="a", features=feats, deception=0, emotions=("Bliss",), personality=BIG_FIVE[0])
    with pytest.raises(DatasetError, match="unknown personality"):
        Sample(id="a", features=feats, deception=0, emotions=(EMOTIONS[0],), personality="Bravery")
    with pytest.raises(DatasetError, match="missing"):
        Sample(
            id="a",
            features={MODALITIES[0]: np.zeros((2, 3))},
            deception=0,
            emotions=(EMOTIONS[0],),
            personality=BIG_FIVE[0],
        )


def test_split_ratios_and_determinism():
    samples = make_synthetic_dataset(SyntheticSpec(n_samples=200, seed=2))
    train, val, test = split_dataset(samples, (0.7, 0.15, 0.15))
    assert len(train) + len(val) + len(test) == 200
    assert abs(len(train) - 140) <= 1 and abs(len(val) - 30) <= 1
    train2, val2, test2 = split_dataset(list(reversed(samples)), (0.7, 0.15, 0.15))
    assert {s.id for s in train} == {s.id for s in train2}
    assert {s.id for s in val} == {s.id for s in val2}


def test_split_subject_disjoint():
    samples = make_synthetic_dataset(SyntheticSpec(n_samples=120, seed=3, subject_count=30))
    train, val, test = split_dataset(samples)
    subjects = [{s.subject_id for s in part} for part in (train, val, test)]
    assert subjects[0] & subjects[1] == set()
    assert subjects[0] & subjects[2] == set()
    assert subjects[1] & subjects[2] == set()


def test_split_rejects_bad_ratios():
    samples = make_synthetic_dataset(SyntheticSpec(n_samples=4, seed=0))
    with pytest.raises(DatasetError):
        split_dataset(samples, (0.5, 0.2, 0.2))


def test_synthetic_generator_invariants():
    spec = SyntheticSpec(n_samples=50, seed=4, noise_prob=0.5, noisy_modality="video")
    samples = make_synthetic_dataset(spec)
    assert len(samples) == 50
    for s in samples:
        assert s.emotions  # nonempty
        assert s.personality in BIG_FIVE
        assert s.deception in (0, 1)
        for m in MODALITIES:
            assert s.features[m].shape == (spec.seq_len, spec.feature_dims[m])
    # determinism
    again = make_synthetic_dataset(spec)
    for a, b in zip(samples, again):
        assert a.emotions == b.emotions
        np.testing.assert_array_equal(a.features[MODALITIES[1]], b.features[MODALITIES[1]])


def test_group_by_shape_and_stack():
    spec = SyntheticSpec(n_samples=4, seed=5)
    samples = make_synthetic_dataset(spec)
    short = make_synthetic_dataset(SyntheticSpec(n_samples=2, seq_len=3, seed=6))
    groups = group_by_shape(samples + short)
    assert sorted(len(g) for g in groups) == [2, 4]
    stacked = stack_features(samples)
    for m in MODALITIES:
        assert stacked[m].shape == (4, spec.seq_len, spec.feature_dims[m])
    with pytest.raises(DatasetError):
        stack_features(samples + short)
