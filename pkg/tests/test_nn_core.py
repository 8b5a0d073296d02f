import numpy as np
import pytest

from pareto_fuse.errors import ConfigurationError, NumericError, UsageError
from pareto_fuse.nn import (GradientTape, ParameterStore, SelfAttention, Tensor,
                            bce_loss, concat, dense_forward, gather_rows,
                            optimizer_step, self_attention_forward,
                            stop_gradient)
from conftest import finite_difference, rel_err


def test_dense_identity():
    x = np.array([1.0, -2.0, 3.0])
    out = dense_forward(x, np.eye(3), np.zeros(3), "none")
    np.testing.assert_array_equal(out.data, x)


def test_dense_sigmoid_zero():
    out = dense_forward(np.array([0.0]), np.array([[1.0]]), np.array([0.0]),
                        "sigmoid")
    assert out.data[0] == 0.5


def test_dense_relu_hand_computed():
    w = np.array([[1.0, -2.0], [0.5, 1.0]])
    b = np.array([0.1, -0.3])
    x = np.array([2.0, -1.0])
    # W is applied as x @ W: [2*1 - 1*0.5 + 0.1, 2*(-2) - 1*1 - 0.3] = [1.6, -5.3]
    out = dense_forward(x, w, b, "relu")
    np.testing.assert_allclose(out.data, [1.6, 0.0], atol=1e-15)


def test_dense_shape_mismatch_names_shapes():
    with pytest.raises(ConfigurationError, match=r"\(3,\).*\(2, 2\)"):
        dense_forward(np.zeros(3), np.zeros((2, 2)), np.zeros(2))


def test_bce_analytic_values():
    assert bce_loss(0.5, 1.0).item() == pytest.approx(np.log(2.0), abs=1e-12)
    assert bce_loss(0.2, 0.0).item() == pytest.approx(-np.log(0.8), abs=1e-12)
    assert bce_loss(1.0 - 1e-9, 1.0).item() < 1e-6


def test_bce_rejects_out_of_range():
    with pytest.raises(NumericError):
        bce_loss(1.5, 1.0)


def test_bce_logit_gradient_is_p_minus_y():
    logit = Tensor(np.array([0.3]), requires_grad=True)
    p = logit.sigmoid()
    loss = bce_loss(p, np.array([1.0]))
    loss.backward()
    expected = p.data - 1.0
    np.testing.assert_allclose(logit.grad, expected, rtol=1e-12)


def test_backward_scalar_square():
    w = Tensor(np.array([3.0]), requires_grad=True)
    (w * w).sum().backward()
    assert w.grad[0] == 6.0


def test_backward_twice_raises():
    w = Tensor(np.array([3.0]), requires_grad=True)
    loss = (w * w).sum()
    loss.backward()
    with pytest.raises(UsageError):
        loss.backward()


def test_stop_gradient_exactly_zero():
    store = ParameterStore()
    w = store.add("w", np.array([[1.0, 2.0], [3.0, 4.0]]))
    x = Tensor(np.array([[1.0, 1.0]]))
    hidden = x @ w
    loss = (stop_gradient(hidden) * Tensor(np.ones((1, 2)))).sum() \
        + (x @ store.add("w2", np.eye(2))).sum()
    tape = GradientTape(store)
    tape.record(loss)
    assert np.all(tape.grads["w"] == 0.0)
    assert np.any(tape.grads["w2"] != 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_two_layer_net_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = {
        "w1": rng.standard_normal((4, 6)), "b1": rng.standard_normal(6),
        "w2": rng.standard_normal((6, 1)), "b2": rng.standard_normal(1),
    }
    x = rng.standard_normal((3, 4))
    y = rng.integers(0, 2, size=3).astype(float)

    def run(as_tensors=False):
        store = ParameterStore()
        ts = {k: store.add(k, v) for k, v in params.items()}
        h = dense_forward(x, ts["w1"], ts["b1"], "relu")
        p = dense_forward(h, ts["w2"], ts["b2"], "sigmoid").reshape(-1)
        loss = bce_loss(p, y)
        return loss, store

    def value():
        return run()[0].item()

    fd = finite_difference(value, params)
    loss, store = run()
    tape = GradientTape(store)
    tape.record(loss)
    for name in params:
        assert rel_err(tape.grads[name], fd[name]) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_attention_and_softmax_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d = 3
    params = {k: rng.standard_normal((d, d)) * 0.5 for k in ("wq", "wk", "wv")}
    tokens = rng.standard_normal((4, d))
    target = rng.standard_normal((4, d))

    def run():
        store = ParameterStore()
        ts = {k: store.add(k, v) for k, v in params.items()}
        out = self_attention_forward(tokens, ts)
        loss = ((out - Tensor(target)) * (out - Tensor(target))).mean()
        return loss, store

    fd = finite_difference(lambda: run()[0].item(), params)
    loss, store = run()
    tape = GradientTape(store)
    tape.record(loss)
    for name in params:
        assert rel_err(tape.grads[name], fd[name]) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_embedding_gather_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    params = {"table": rng.standard_normal((5, 3))}
    idx = np.array([0, 2, 2, 4])

    def run():
        store = ParameterStore()
        t = store.add("table", params["table"])
        rows = gather_rows(t, idx)
        loss = (rows * rows).mean()
        return loss, store

    fd = finite_difference(lambda: run()[0].item(), params)
    loss, store = run()
    tape = GradientTape(store)
    tape.record(loss)
    assert rel_err(tape.grads["table"], fd["table"]) < 1e-4


def test_tape_linearity_and_scaling():
    rng = np.random.default_rng(3)
    w_init = rng.standard_normal((3, 2))
    x = rng.standard_normal((4, 3))

    def losses(store):
        w = store.add("w", w_init)
        h = Tensor(x) @ w
        return (h * h).mean(), h.sum()

    def grads(a, b):
        store = ParameterStore()
        l1, l2 = losses(store)
        tape = GradientTape(store)
        tape.record(a * l1 + b * l2)
        return tape.grads["w"]

    store = ParameterStore()
    l1, l2 = losses(store)
    t1 = GradientTape(store)
    t1.record(l1)
    store2 = ParameterStore()
    m1, m2 = losses(store2)
    t2 = GradientTape(store2)
    t2.record(m2)
    combined = grads(2.0, -0.5)
    np.testing.assert_allclose(combined, 2.0 * t1.grads["w"] - 0.5 * t2.grads["w"],
                               atol=1e-12)
    np.testing.assert_allclose(grads(3.0, 0.0) / 3.0, t1.grads["w"], rtol=1e-12)


def test_tape_accumulation_additive():
    rng = np.random.default_rng(4)
    w_init = rng.standard_normal((2, 2))
    x = rng.standard_normal((3, 2))

    def make(store):
        w = store.add("w", w_init)
        h = Tensor(x) @ w
        return (h * h).sum(), h.sum()

    s1 = ParameterStore()
    l1, l2 = make(s1)
    tape = GradientTape(s1)
    tape.record(l1)
    tape.record(l2)
    s2 = ParameterStore()
    m1, m2 = make(s2)
    tape2 = GradientTape(s2)
    tape2.record(m1 + m2)
    np.testing.assert_allclose(tape.grads["w"], tape2.grads["w"], atol=1e-12)


def test_tape_scale_applied_at_accumulation():
    store = ParameterStore()
    w = store.add("w", np.array([[2.0]]))
    loss = (w * w).sum()
    tape = GradientTape(store)
    tape.record(loss, scale=0.25)
    assert tape.grads["w"][0, 0] == 1.0


def test_sgd_one_step_arithmetic():
    store = ParameterStore()
    store.add("theta", np.array([1.0]))
    tape = GradientTape(store)
    tape.grads["theta"][:] = 2.0
    optimizer_step(store, tape, 0.1, "sgd")
    assert store["theta"].data[0] == pytest.approx(0.8, abs=1e-15)
    assert store.step_count == 1


def test_zero_gradient_leaves_parameters_unchanged():
    store = ParameterStore()
    store.add("theta", np.array([1.0, -2.0]))
    tape = GradientTape(store)
    before = store["theta"].data.copy()
    optimizer_step(store, tape, 0.5, "sgd")
    np.testing.assert_array_equal(store["theta"].data, before)


def test_nonfinite_gradient_names_parameter():
    store = ParameterStore()
    store.add("theta", np.array([1.0]))
    tape = GradientTape(store)
    tape.grads["theta"][:] = np.nan
    with pytest.raises(NumericError, match="theta"):
        optimizer_step(store, tape, 0.1, "adam")


def test_adam_converges_on_quadratic_bowl():
    store = ParameterStore()
    theta = store.add("theta", np.array([3.0, -2.0, 1.5]))
    for _ in range(5000):
        loss = (theta * theta).sum()
        tape = GradientTape(store)
        tape.record(loss)
        optimizer_step(store, tape, 0.01, "adam")
        if np.abs(theta.data).max() < 1e-6:
            break
    assert np.abs(theta.data).max() < 1e-6


def test_attention_single_token_is_value_residual():
    rng = np.random.default_rng(9)
    store = ParameterStore()
    attn = SelfAttention(store, "a", 4, rng)
    token = rng.standard_normal((1, 4))
    out, weights = attn(token, return_weights=True)
    assert weights.data.shape == (1, 1)
    assert weights.data[0, 0] == 1.0
    np.testing.assert_allclose(out.data, token + token @ attn.params["wv"].data,
                               rtol=1e-12)


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(10)
    store = ParameterStore()
    attn = SelfAttention(store, "a", 5, rng)
    tokens = rng.standard_normal((2, 6, 5))
    out, weights = attn(tokens, return_weights=True)
    assert out.data.shape == tokens.shape
    np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)


def test_attention_two_tokens_hand_computed():
    d = 2
    wq = np.array([[1.0, 0.0], [0.0, 1.0]])
    wk = np.array([[0.5, 0.0], [0.0, 0.5]])
    wv = np.array([[0.0, 1.0], [1.0, 0.0]])
    tokens = np.array([[1.0, 0.0], [0.0, 2.0]])
    q = tokens @ wq
    k = tokens @ wk
    scores = q @ k.T / np.sqrt(d)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    attn = e / e.sum(axis=1, keepdims=True)
    expected = tokens + attn @ (tokens @ wv)
    out = self_attention_forward(tokens, {"wq": wq, "wk": wk, "wv": wv})
    np.testing.assert_allclose(out.data, expected, rtol=1e-12)


def test_snapshot_restore_bit_exact():
    rng = np.random.default_rng(11)
    store = ParameterStore()
    w = store.add("w", rng.standard_normal((3, 3)))
    snap = store.snapshot()
    original = w.data.copy()
    tape = GradientTape(store)
    tape.grads["w"][:] = 1.0
    optimizer_step(store, tape, 0.1, "adam")
    assert not np.array_equal(w.data, original)
    store.restore(snap)
    assert np.array_equal(w.data, original)
    assert store.step_count == 0


def test_snapshot_file_roundtrip(tmp_path):
    rng = np.random.default_rng(12)
    store = ParameterStore()
    store.add("w", rng.standard_normal((2, 4)))
    tape = GradientTape(store)
    tape.grads["w"][:] = 0.3
    optimizer_step(store, tape, 0.05, "adam")
    path = tmp_path / "snap.json"
    store.save(path, "ranking", header={"note": "x"})
    other = ParameterStore()
    other.add("w", np.zeros((2, 4)))
    header = other.load(path)
    assert header == {"note": "x"}
    assert np.array_equal(other["w"].data, store["w"].data)
    assert np.array_equal(other.optimizer_state["w"]["m"],
                          store.optimizer_state["w"]["m"])
    assert other.step_count == store.step_count


def test_forward_backward_determinism():
    def run():
        rng = np.random.default_rng(77)
        store = ParameterStore()
        w = store.add("w", rng.standard_normal((5, 5)))
        x = rng.standard_normal((4, 5))
        h = dense_forward(x, w, store.add("b", np.zeros(5)), "relu")
        loss = (h * h).mean()
        tape = GradientTape(store)
        tape.record(loss)
        return loss.item(), {k: v.copy() for k, v in tape.grads.items()}

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


def test_concat_gradient_split():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((2, 3)), requires_grad=True)
    out = concat([a, b], axis=1)
    (out * Tensor(np.arange(10.0).reshape(2, 5))).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0.0, 1.0], [5.0, 6.0]])
    np.testing.assert_array_equal(b.grad, [[2.0, 3.0, 4.0], [7.0, 8.0, 9.0]])
