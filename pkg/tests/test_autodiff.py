import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reliafuse.autodiff import ContractError, Parameter, ShapeError, Tensor, concat, softmax
from reliafuse.layers import EmptySequenceError, GruCell, Linear, fc_forward, gru_forward
from reliafuse.losses import cross_entropy, mse

from gradcheck import assert_grads_match


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Independent triple-loop matrix multiply oracle."""
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


# ----------------------------------------------------------------------
# fully connected forward


def test_fc_identity():
    x = Tensor([[1.0, 0.0], [0.0, 1.0]])
    w = Parameter(np.eye(2), name="w")
    b = Parameter(np.zeros(2), name="b")
    out = fc_forward(x, w, b)
    np.testing.assert_array_equal(out.data, [[1.0, 0.0], [0.0, 1.0]])


def test_fc_scalar_affine():
    out = fc_forward(Tensor([[2.0]]), Parameter([[3.0]], "w"), Parameter([1.0], "b"))
    assert out.data[0, 0] == 7.0


def test_fc_matches_matmul_oracle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 5))
    b = rng.normal(size=5)
    out = fc_forward(Tensor(x), Parameter(w, "w"), Parameter(b, "b"))
    expected = naive_matmul(x, w) + b
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_fc_shape_mismatch_names_operands():
    with pytest.raises(ShapeError, match="wq"):
        fc_forward(Tensor(np.zeros((2, 3))), Parameter(np.zeros((4, 5)), "wq"), Parameter(np.zeros(5), "b"))


# ----------------------------------------------------------------------
# GRU cell


def scalar_gru_step(x, h, wz, bz, wr, br, wc, bc):
    """Hand-unrolled single GRU step on plain arrays (independent oracle)."""
    cat = np.concatenate([x, h])
    z = 1.0 / (1.0 + np.exp(-(cat @ wz + bz)))
    r = 1.0 / (1.0 + np.exp(-(cat @ wr + br)))
    cat2 = np.concatenate([x, r * h])
    cand = np.tanh(cat2 @ wc + bc)
    return (1.0 - z) * h + z * cand


def make_cell(in_dim=3, hidden=4, seed=1):
    rng = np.random.default_rng(seed)
    return GruCell(in_dim, hidden, rng, "gru")


def test_gru_closed_update_gate_freezes_state():
    cell = make_cell()
    for p in (cell.w_update, cell.w_reset, cell.w_cand, cell.b_reset, cell.b_cand):
        p.data[:] = 0.0
    cell.b_update.data[:] = -500.0  # sigmoid(-500) ~ 0: update gate closed
    h0 = Tensor(np.array([[0.3, -0.2, 0.9, 0.1]]))
    seq = np.random.default_rng(0).normal(size=(5, 3))
    out = gru_forward(cell, seq, h0=h0)
    np.testing.assert_allclose(out.data, h0.data, atol=1e-200)


def test_gru_single_step_matches_scalar_oracle():
    cell = make_cell(seed=5)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(1, 3))
    expected = scalar_gru_step(
        x[0],
        np.zeros(4),
        cell.w_update.data,
        cell.b_update.data,
        cell.w_reset.data,
        cell.b_reset.data,
        cell.w_cand.data,
        cell.b_cand.data,
    )
    out = gru_forward(cell, x)
    np.testing.assert_allclose(out.data[0], expected, atol=1e-12)


def test_gru_three_steps_compose():
    cell = make_cell(seed=11)
    rng = np.random.default_rng(4)
    seq = rng.normal(size=(3, 3))
    h = np.zeros(4)
    for t in range(3):
        h = scalar_gru_step(
            seq[t],
            h,
            cell.w_update.data,
            cell.b_update.data,
            cell.w_reset.data,
            cell.b_reset.data,
            cell.w_cand.data,
            cell.b_cand.data,
        )
    out = gru_forward(cell, seq)
    np.testing.assert_allclose(out.data[0], h, atol=1e-12)


def test_gru_empty_sequence_rejected():
    cell = make_cell()
    with pytest.raises(EmptySequenceError):
        gru_forward(cell, np.zeros((0, 3)))


def test_gru_state_bounded_by_tanh_candidate():
    cell = make_cell(seed=3)
    seq = np.random.default_rng(2).normal(size=(20, 3)) * 3.0
    out = gru_forward(cell, seq)
    assert np.all(np.abs(out.data) < 1.0)


# ----------------------------------------------------------------------
# softmax


def test_softmax_symmetry():
    out = softmax(Tensor([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-12)


def test_softmax_large_logits_stable():
    out = softmax(Tensor([[1000.0, 0.0]]))
    assert np.isfinite(out.data).all()
    np.testing.assert_allclose(out.data, [[1.0, 0.0]], atol=1e-300)


def test_softmax_log_ratio():
    out = softmax(Tensor([[np.log(1.0), np.log(2.0), np.log(3.0)]]))
    # exponentiate-and-normalize by hand: (1, 2, 3) / 6
    np.testing.assert_allclose(out.data, [[1 / 6, 2 / 6, 3 / 6]], atol=1e-12)


@settings(max_examples=100)
@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
    st.floats(-100, 100),
)
def test_softmax_rows_normalized_and_shift_invariant(logits, shift):
    row = np.array([logits])
    a = softmax(Tensor(row)).data
    b = softmax(Tensor(row + shift)).data
    assert abs(a.sum() - 1.0) <= 1e-9
    assert np.all(a >= 0.0)
    assert np.max(np.abs(a - b)) < 1e-9


# ----------------------------------------------------------------------
# losses


def test_cross_entropy_perfect_prediction():
    onehot = np.array([[0.0, 1.0, 0.0]])
    assert float(cross_entropy(Tensor(onehot), onehot).data) <= 1e-9


def test_cross_entropy_uniform_baseline():
    pred = Tensor(np.full((2, 4), 0.25))
    target = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=float)
    np.testing.assert_allclose(float(cross_entropy(pred, target).data), np.log(4), atol=1e-9)


def test_cross_entropy_single_term():
    pred = Tensor([[0.7, 0.2, 0.1]])
    target = np.array([[1.0, 0.0, 0.0]])
    np.testing.assert_allclose(float(cross_entropy(pred, target).data), -np.log(0.7), rtol=1e-10)


def test_cross_entropy_rejects_unnormalized_rows():
    with pytest.raises(ContractError):
        cross_entropy(Tensor([[0.5, 0.4]]), np.array([[1.0, 0.0]]))


def test_mse_examples():
    assert float(mse(Tensor([[1.0, 2.0]]), Tensor([[1.0, 2.0]])).data) == 0.0
    assert float(mse(Tensor([[1.0, 1.0]]), Tensor([[0.0, 0.0]])).data) == 1.0
    got = float(mse(Tensor([[1.0, 2.0, 3.0]]), Tensor([[2.0, 4.0, 0.0]])).data)
    np.testing.assert_allclose(got, 14.0 / 3.0, rtol=1e-12)


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse(Tensor([[1.0, 2.0]]), Tensor([[1.0, 2.0, 3.0]]))


# ----------------------------------------------------------------------
# backward mechanics


def test_backward_linear_case():
    w = Parameter([[2.0]], name="w")
    x = Tensor([[3.0]])
    loss = (w * x).sum()
    loss.backward()
    assert w.grad[0, 0] == 3.0


def test_backward_requires_scalar():
    w = Parameter([[1.0, 2.0]], name="w")
    with pytest.raises(ContractError):
        (w * 2.0).backward()


def test_backward_twice_doubles_gradients():
    rng = np.random.default_rng(9)
    w = Parameter(rng.normal(size=(3, 2)), name="w")
    x = Tensor(rng.normal(size=(2, 3)))

    def loss():
        return softmax(x @ w).sum(axis=1).mean() + ((x @ w) ** 2).mean()

    loss().backward()
    once = w.grad.copy()
    w.zero_grad()
    loss().backward()
    loss().backward()
    np.testing.assert_array_equal(w.grad, 2.0 * once)


def test_gradcheck_elementwise_composition():
    rng = np.random.default_rng(21)
    a = Parameter(rng.uniform(-2, 2, size=(2, 3)), name="a")
    b = Parameter(rng.uniform(-2, 2, size=(2, 3)), name="b")

    def run():
        t = (a * b).sigmoid() + (a - b).tanh() + (a * 0.5).softplus()
        return (t**2).mean()

    loss = run()
    loss.backward()
    assert_grads_match(lambda: run().data, [a, b], context="elementwise composition")


def test_gradcheck_matmul_softmax_chain():
    rng = np.random.default_rng(22)
    w = Parameter(rng.uniform(-2, 2, size=(3, 4)), name="w")
    x = Tensor(rng.uniform(-2, 2, size=(2, 3)))

    def run():
        probs = softmax(x @ w)
        return ((probs + 1e-12).log() * -0.5).mean() + (w**2).sum() * 0.01

    run().backward()
    assert_grads_match(lambda: run().data, [w], context="matmul softmax chain")


def test_gradcheck_concat_slice_div():
    rng = np.random.default_rng(23)
    a = Parameter(rng.uniform(0.5, 2, size=(2, 2)), name="a")
    b = Parameter(rng.uniform(0.5, 2, size=(2, 1)), name="b")

    def run():
        joined = concat([a, b], axis=1)
        col = joined[:, 0:1] / joined.sum(axis=1, keepdims=True)
        return (col.relu() ** 2).mean()

    run().backward()
    assert_grads_match(lambda: run().data, [a, b], context="concat/slice/div")


def test_gradcheck_gru_parameters():
    cell = make_cell(in_dim=2, hidden=3, seed=17)
    seq = np.random.default_rng(1).uniform(-2, 2, size=(3, 2))
    params = list(cell.parameters())

    def run():
        return (gru_forward(cell, seq) ** 2).mean()

    run().backward()
    assert_grads_match(lambda: run().data, params, context="gru")


def test_linear_layer_gradcheck():
    rng = np.random.default_rng(31)
    layer = Linear(3, 2, rng, "lin")
    x = Tensor(rng.uniform(-2, 2, size=(4, 3)))

    def run():
        return (layer(x).tanh() ** 2).mean()

    run().backward()
    assert_grads_match(lambda: run().data, list(layer.parameters()), context="linear")
