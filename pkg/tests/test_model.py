import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliafuse.autodiff import Tensor
from reliafuse.checkpoint import CheckpointError, load_model, save_model
from reliafuse.labels import MODALITIES, TASK_DIMS, TASKS, Modality
from reliafuse.model import (
    FusionConfig,
    FusionWeights,
    PositivityError,
    ReliabilityFusionModel,
    alignment_loss,
    fuse,
    fusion_weights,
    scalar_uncertainty,
    sorting_loss,
)

from gradcheck import assert_grads_match

T, V, A = MODALITIES


def small_config(hidden=4, emotion_head="sigmoid"):
    return FusionConfig(
        feature_dims={T: 3, V: 2, A: 2},
        hidden_dim=hidden,
        beta=1.0,
        lambda1=0.1,
        lambda2=0.1,
        emotion_head=emotion_head,
    )


def random_features(rng, config, steps=3):
    return {m: rng.uniform(-2, 2, size=(steps, config.feature_dims[m])) for m in MODALITIES}


def random_targets(rng, batch=1):
    dec = np.zeros((batch, 2))
    dec[np.arange(batch), rng.integers(0, 2, size=batch)] = 1.0
    emo = (rng.random((batch, 8)) < 0.4).astype(float)
    emo[emo.sum(axis=1) == 0, 0] = 1.0
    per = np.zeros((batch, 5))
    per[np.arange(batch), rng.integers(0, 5, size=batch)] = 1.0
    return {"deception": dec, "emotion": emo, "personality": per}


# ----------------------------------------------------------------------
# uncertainty estimation


def test_sigma_is_softplus_of_zero_for_zeroed_cell():
    model = ReliabilityFusionModel(small_config(), seed=0)
    for p in model.gru_sigma[T].parameters():
        p.data[:] = 0.0
    emb = model.estimate_uncertainty(np.random.default_rng(0).normal(size=(4, 3)), T)
    np.testing.assert_allclose(emb.sigma.data, np.log(2.0), atol=1e-12)


def test_estimate_uncertainty_deterministic():
    model = ReliabilityFusionModel(small_config(), seed=1)
    seq = np.random.default_rng(5).normal(size=(5, 3))
    a = model.estimate_uncertainty(seq, T)
    b = model.estimate_uncertainty(seq, T)
    np.testing.assert_array_equal(a.mu.data, b.mu.data)
    np.testing.assert_array_equal(a.sigma.data, b.sigma.data)


def test_sigma_strictly_positive_over_parameter_draws():
    model = ReliabilityFusionModel(small_config(), seed=0)
    rng = np.random.default_rng(123)
    seq = rng.normal(size=(3, 3))
    for _ in range(1000):
        for p in model.gru_sigma[T].parameters():
            p.data = rng.normal(size=p.data.shape) * 3.0
        emb = model.estimate_uncertainty(seq, T)
        assert np.all(emb.sigma.data > 0.0)


def test_scalar_uncertainty_is_mean():
    from reliafuse.model import GaussianEmbedding

    emb = GaussianEmbedding(mu=Tensor([[0.0] * 3]), sigma=Tensor([[2.0, 2.0, 2.0]]))
    assert scalar_uncertainty(emb) == 2.0
    emb2 = GaussianEmbedding(mu=Tensor([[0.0] * 3]), sigma=Tensor([[1.0, 2.0, 3.0]]))
    assert scalar_uncertainty(emb2) == 2.0


def test_scalar_uncertainty_matches_oracle_mean():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(1, 16))
    sigma = Tensor(raw).softplus()
    from reliafuse.model import GaussianEmbedding

    emb = GaussianEmbedding(mu=Tensor(np.zeros((1, 16))), sigma=sigma)
    expected = sum(float(x) for x in sigma.data[0]) / 16.0
    np.testing.assert_allclose(scalar_uncertainty(emb), expected, atol=1e-12)


# ----------------------------------------------------------------------
# fusion weights


def test_fusion_weights_symmetry():
    w = fusion_weights({T: 1.0, V: 1.0, A: 1.0})
    np.testing.assert_allclose(w.as_array(), [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_fusion_weights_inverse_proportional():
    w = fusion_weights({T: 1.0, V: 2.0, A: 4.0})
    np.testing.assert_allclose(w.as_array(), [4 / 7, 2 / 7, 1 / 7], atol=1e-12)


def test_fusion_weights_scale_invariant_constant():
    for c in (0.1, 1.0, 37.5):
        w = fusion_weights({T: c, V: c, A: c})
        np.testing.assert_allclose(w.as_array(), [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_fusion_weights_rejects_nonpositive():
    with pytest.raises(PositivityError):
        fusion_weights({T: 1.0, V: 0.0, A: 2.0})


@settings(max_examples=300)
@given(
    st.tuples(
        st.floats(1e-6, 1e6),
        st.floats(1e-6, 1e6),
        st.floats(1e-6, 1e6),
    ),
    st.floats(1e-3, 1e3),
)
def test_fusion_weight_properties(sig, scale):
    sigmas = {m: s for m, s in zip(MODALITIES, sig)}
    w = fusion_weights(sigmas)
    arr = w.as_array()
    assert abs(arr.sum() - 1.0) <= 1e-9
    assert np.all(arr > 0.0)
    # anti-monotone: lower uncertainty gets the larger weight
    for i, mi in enumerate(MODALITIES):
        for j, mj in enumerate(MODALITIES):
            if sigmas[mi] < sigmas[mj]:
                assert arr[i] > arr[j]
    scaled = fusion_weights({m: scale * s for m, s in sigmas.items()})
    np.testing.assert_allclose(scaled.as_array(), arr, atol=1e-9)


# ----------------------------------------------------------------------
# fuse


def test_fuse_uniform_average_of_basis_vectors():
    e = np.eye(4)
    weights = FusionWeights({T: 1 / 3, V: 1 / 3, A: 1 / 3})
    out = fuse({T: e[0], V: e[1], A: e[2]}, weights)
    np.testing.assert_allclose(out, [1 / 3, 1 / 3, 1 / 3, 0.0], atol=1e-12)


def test_fuse_degenerate_weight_returns_dominant_vector():
    eps = 1e-9
    weights = FusionWeights({T: 1 - 2 * eps, V: eps, A: eps})
    rng = np.random.default_rng(0)
    vecs = {m: rng.normal(size=6) for m in MODALITIES}
    out = fuse(vecs, weights)
    assert np.max(np.abs(out - vecs[T])) <= 2 * eps * max(np.abs(v).max() for v in vecs.values())


def test_fuse_matches_scalar_loop_oracle():
    rng = np.random.default_rng(11)
    vecs = {m: rng.normal(size=5) for m in MODALITIES}
    sig = {T: 0.5, V: 1.5, A: 0.9}
    weights = fusion_weights(sig)
    out = fuse(vecs, weights)
    expected = np.zeros(5)
    for k in range(5):
        acc = 0.0
        for m in MODALITIES:
            acc += weights.w[m] * vecs[m][k]
        expected[k] = acc
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_fuse_missing_modality_rejected():
    weights = FusionWeights({T: 1 / 3, V: 1 / 3, A: 1 / 3})
    with pytest.raises(Exception, match="missing"):
        fuse({T: np.ones(3), V: np.ones(3)}, weights)


# ----------------------------------------------------------------------
# alignment loss


def test_alignment_zero_when_sigma_equals_error():
    preds = {m: np.array([0.7, 0.2, 0.1]) for m in MODALITIES}
    target = np.array([1.0, 0.0, 0.0])
    err = -np.log(0.7 + 1e-12)
    sigmas = {m: err for m in MODALITIES}
    assert alignment_loss(sigmas, preds, target) <= 1e-18


def test_alignment_three_unit_errors():
    onehot = np.array([1.0, 0.0])
    perfect = {m: np.array([1.0, 0.0]) for m in MODALITIES}
    sigmas = {m: 1.0 for m in MODALITIES}
    got = alignment_loss(sigmas, perfect, onehot)
    # errors are -log(1 + eps) ~ 0, so each term is ~1
    np.testing.assert_allclose(got, 3.0, atol=1e-9)


def test_alignment_matches_hand_sum():
    preds = {
        T: np.array([0.7, 0.2, 0.1]),
        V: np.array([0.2, 0.5, 0.3]),
        A: np.array([0.1, 0.1, 0.8]),
    }
    target = np.array([1.0, 0.0, 0.0])
    sigmas = {T: 0.5, V: 1.0, A: 2.0}
    eps = 1e-12
    expected = (
        (0.5 - (-np.log(0.7 + eps))) ** 2
        + (1.0 - (-np.log(0.2 + eps))) ** 2
        + (2.0 - (-np.log(0.1 + eps))) ** 2
    )
    np.testing.assert_allclose(alignment_loss(sigmas, preds, target), expected, rtol=1e-12)


# ----------------------------------------------------------------------
# sorting loss


def brute_force_sorting(sigmas, weights, beta):
    """Independent pair-loop oracle."""
    total = 0.0
    for m in MODALITIES:
        for j in MODALITIES:
            if m is j:
                continue
            total += max(0.0, (sigmas[m] - sigmas[j]) - beta * (weights.w[m] - weights.w[j]))
    return total


def test_sorting_loss_zero_for_equal_sigmas():
    sig = {m: 1.7 for m in MODALITIES}
    w = fusion_weights(sig)
    assert sorting_loss(sig, w, beta=1.0) == 0.0


def test_sorting_loss_124_beta1():
    sig = {T: 1.0, V: 2.0, A: 4.0}
    w = fusion_weights(sig)
    got = sorting_loss(sig, w, beta=1.0)
    np.testing.assert_allclose(got, 48.0 / 7.0, atol=1e-12)
    np.testing.assert_allclose(got, brute_force_sorting(sig, w, 1.0), atol=1e-12)


def test_sorting_loss_beta_zero():
    sig = {T: 1.0, V: 2.0, A: 4.0}
    w = fusion_weights(sig)
    got = sorting_loss(sig, w, beta=0.0)
    np.testing.assert_allclose(got, 6.0, atol=1e-12)


@settings(max_examples=200)
@given(
    st.tuples(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100)),
    st.floats(0, 10),
)
def test_sorting_loss_matches_brute_force(sig_vals, beta):
    sig = {m: s for m, s in zip(MODALITIES, sig_vals)}
    w = fusion_weights(sig)
    got = sorting_loss(sig, w, beta)
    assert got >= 0.0
    np.testing.assert_allclose(got, brute_force_sorting(sig, w, beta), rtol=1e-9, atol=1e-12)


# ----------------------------------------------------------------------
# forward pass


def test_forward_zero_final_layers_gives_uniform_outputs():
    model = ReliabilityFusionModel(small_config(), seed=2)
    for task in TASKS:
        final = model.heads[task].layers[-1]
        final.weights.data[:] = 0.0
        final.bias.data[:] = 0.0
    rng = np.random.default_rng(1)
    out = model.forward(random_features(rng, model.config))
    np.testing.assert_allclose(out.predictions["deception"].data, [[0.5, 0.5]], atol=1e-12)
    np.testing.assert_allclose(out.predictions["personality"].data, [[0.2] * 5], atol=1e-12)
    np.testing.assert_allclose(out.predictions["emotion"].data, [[0.5] * 8], atol=1e-12)


def test_forward_deterministic():
    model = ReliabilityFusionModel(small_config(), seed=3)
    rng = np.random.default_rng(2)
    feats = random_features(rng, model.config)
    a = model.forward(feats)
    b = model.forward(feats)
    for task in TASKS:
        np.testing.assert_array_equal(a.predictions[task].data, b.predictions[task].data)
    np.testing.assert_array_equal(a.weights.data, b.weights.data)


def test_forward_weights_match_external_recomposition():
    model = ReliabilityFusionModel(small_config(), seed=4)
    rng = np.random.default_rng(3)
    feats = random_features(rng, model.config)
    out = model.forward(feats)
    sigmas = {
        m: scalar_uncertainty(model.estimate_uncertainty(feats[m], m)) for m in MODALITIES
    }
    recomposed = fusion_weights(sigmas)
    np.testing.assert_allclose(out.weights.data[0], recomposed.as_array(), atol=1e-12)


def test_forward_emotion_rows_not_normalized_but_others_are():
    model = ReliabilityFusionModel(small_config(), seed=8)
    rng = np.random.default_rng(4)
    out = model.forward(random_features(rng, model.config))
    np.testing.assert_allclose(out.predictions["deception"].data.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(out.predictions["personality"].data.sum(axis=1), 1.0, atol=1e-9)
    emo = out.predictions["emotion"].data
    assert np.all((emo > 0.0) & (emo < 1.0))


def test_forward_literal_softmax_emotion_mode():
    model = ReliabilityFusionModel(small_config(emotion_head="softmax"), seed=8)
    rng = np.random.default_rng(4)
    out = model.forward(random_features(rng, model.config))
    np.testing.assert_allclose(out.predictions["emotion"].data.sum(axis=1), 1.0, atol=1e-9)


# ----------------------------------------------------------------------
# total loss


def batch_features(rng, config, batch, steps=3):
    return {
        m: rng.uniform(-2, 2, size=(batch, steps, config.feature_dims[m]))
        for m in MODALITIES
    }


def test_total_loss_degenerate_mixing_equals_classification():
    model = ReliabilityFusionModel(small_config(), seed=5)
    rng = np.random.default_rng(6)
    out = model.forward_batch(batch_features(rng, model.config, 2))
    targets = random_targets(rng, 2)
    breakdown = model.total_loss(out, targets, lambda1=0.0, lambda2=0.0)
    np.testing.assert_allclose(
        float(breakdown.total.data), float(breakdown.classification.data), atol=1e-15
    )


def test_total_loss_decomposition():
    model = ReliabilityFusionModel(small_config(), seed=6)
    rng = np.random.default_rng(7)
    for trial in range(5):
        out = model.forward_batch(batch_features(rng, model.config, 3))
        targets = random_targets(rng, 3)
        lam1, lam2 = rng.uniform(0, 2, size=2)
        full = model.total_loss(out, targets, lambda1=lam1, lambda2=lam2)
        bare = model.total_loss(out, targets, lambda1=0.0, lambda2=0.0)
        diff = float(full.total.data) - float(bare.total.data)
        expected = lam1 * float(full.alignment.data) + lam2 * float(full.sorting.data)
        assert abs(diff - expected) < 1e-10


def test_total_loss_matches_standalone_component_oracles():
    model = ReliabilityFusionModel(small_config(), seed=7)
    rng = np.random.default_rng(8)
    feats = random_features(rng, model.config)
    out = model.forward(feats)
    targets = random_targets(rng, 1)
    breakdown = model.total_loss(out, targets, lambda1=0.3, lambda2=0.7)

    # standalone oracles over the forward outputs
    eps = 1e-12
    dec = out.predictions["deception"].data[0]
    per = out.predictions["personality"].data[0]
    emo = out.predictions["emotion"].data[0]
    l_dec = -np.sum(targets["deception"][0] * np.log(dec + eps))
    l_per = -np.sum(targets["personality"][0] * np.log(per + eps))
    y = targets["emotion"][0]
    l_emo = -np.mean(y * np.log(emo + eps) + (1 - y) * np.log(1 - emo + eps))
    l_cls = l_dec + l_per + l_emo

    sig = {m: float(out.sigmas[m].data[0, 0]) for m in MODALITIES}
    l_ali = 0.0
    for m in MODALITIES:
        errs = []
        d = out.per_modality_preds["deception"][m].data[0]
        errs.append(-np.sum(targets["deception"][0] * np.log(d + eps)))
        e = out.per_modality_preds["emotion"][m].data[0]
        errs.append(-np.mean(y * np.log(e + eps) + (1 - y) * np.log(1 - e + eps)))
        p = out.per_modality_preds["personality"][m].data[0]
        errs.append(-np.sum(targets["personality"][0] * np.log(p + eps)))
        l_ali += (sig[m] - np.mean(errs)) ** 2

    w = FusionWeights({m: float(out.weights.data[0, i]) for i, m in enumerate(MODALITIES)})
    l_sor = brute_force_sorting(sig, w, model.config.beta)

    expected = l_cls + 0.3 * l_ali + 0.7 * l_sor
    np.testing.assert_allclose(float(breakdown.total.data), expected, atol=1e-10)


def test_total_loss_missing_label_rejected():
    model = ReliabilityFusionModel(small_config(), seed=9)
    rng = np.random.default_rng(9)
    out = model.forward(random_features(rng, model.config))
    targets = random_targets(rng, 1)
    del targets["emotion"]
    with pytest.raises(KeyError):
        model.total_loss(out, targets)


def test_full_loss_gradients_match_finite_differences():
    config = FusionConfig(feature_dims={T: 2, V: 2, A: 3}, hidden_dim=3)
    model = ReliabilityFusionModel(config, seed=10)
    rng = np.random.default_rng(10)
    feats = batch_features(rng, config, 2, steps=2)
    targets = random_targets(rng, 2)
    params = model.parameters()

    def run():
        out = model.forward_batch(feats)
        return model.total_loss(out, targets).total

    run().backward()
    assert_grads_match(lambda: run().data, params, context="full objective")


# ----------------------------------------------------------------------
# checkpointing


def test_checkpoint_round_trip(tmp_path):
    model = ReliabilityFusionModel(small_config(), seed=11)
    path = tmp_path / "model.json"
    save_model(model, path)
    clone = load_model(path)
    rng = np.random.default_rng(12)
    feats = random_features(rng, model.config)
    a = model.forward(feats)
    b = clone.forward(feats)
    for task in TASKS:
        np.testing.assert_array_equal(a.predictions[task].data, b.predictions[task].data)


def test_checkpoint_shape_mismatch_is_hard_error(tmp_path):
    model = ReliabilityFusionModel(small_config(), seed=12)
    path = tmp_path / "model.json"
    save_model(model, path)
    import json

    payload = json.loads(path.read_text())
    key = next(iter(payload["parameters"]))
    payload["parameters"][key]["shape"] = [1, 1]
    payload["parameters"][key]["data"] = [0.0]
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match="shape mismatch"):
        load_model(path)
