import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscres.errors import DimensionError, DivergenceError, EvaluationError, TrainingError
from oscres.readout import (
    PackedRows,
    ReadoutModel,
    TrainConfig,
    evaluate,
    featurize,
    loss_and_grad,
    predict,
    predict_labels,
    softmax,
    train,
    unflatten,
)
from oscres.simulator import SnapshotMatrix


def numeric_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def max_rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def gradient_check(seed, n=5, F=7, l2=0.01):
    rng = np.random.default_rng(seed)
    W = rng.normal(0, 0.5, (10, F))
    b = rng.normal(0, 0.5, 10)
    X = rng.integers(0, 2, (n, F)).astype(float)
    y = rng.integers(0, 10, n)
    _, gW, gb = loss_and_grad(W, b, X, y, l2)
    nW = numeric_grad(lambda: loss_and_grad(W, b, X, y, l2)[0], W)
    nb = numeric_grad(lambda: loss_and_grad(W, b, X, y, l2)[0], b)
    return max(max_rel_err(gW, nW), max_rel_err(gb, nb))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    assert gradient_check(seed) < 1e-5


def test_featurize_shapes_and_roundtrip():
    Y = np.random.default_rng(0).integers(0, 2, (13, 4)).astype(np.uint8)
    f = featurize(SnapshotMatrix(Y, [1, 2, 3, 4]))
    assert f.shape == (52,)
    np.testing.assert_array_equal(f, Y.reshape(-1))
    np.testing.assert_array_equal(featurize(unflatten(f, 13, 4)), f)
    assert np.all(featurize(np.ones((5, 3))) == 1)
    with pytest.raises(DimensionError):
        featurize(Y, n_neurons=12)


def test_predict_uniform_for_zero_model():
    m = ReadoutModel.zeros(6)
    np.testing.assert_allclose(predict(m, np.ones(6)), np.full(10, 0.1), atol=1e-15)


@given(st.lists(st.floats(-500, 500), min_size=10, max_size=10), st.floats(-1000, 1000))
def test_softmax_simplex_and_shift(logits, c):
    z = np.array(logits)
    p = softmax(z)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(softmax(z + c), p, atol=1e-12)
    assert z[np.argmax(p)] == pytest.approx(z.max(), abs=1e-9)


def test_predict_shape_error():
    with pytest.raises(DimensionError):
        predict(ReadoutModel.zeros(4), np.ones(5))


def separable_toy(seed=0):
    rng = np.random.default_rng(seed)
    # two clusters in 3-D binary-ish space, labels 2 and 7
    X = np.vstack([rng.normal([1, 0, 0], 0.1, (10, 3)), rng.normal([0, 1, 1], 0.1, (10, 3))])
    y = np.array([2] * 10 + [7] * 10)
    return X, y


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_separable_toy_reaches_full_accuracy(optimizer):
    X, y = separable_toy()
    cfg = TrainConfig(learning_rate=0.1, epochs=200, batch_size=20, l2=0.0, optimizer=optimizer)
    m = train(X, y, cfg)
    assert evaluate(m, X, y) == 1.0


def test_full_batch_sgd_loss_non_increasing():
    X, y = separable_toy(1)
    cfg = TrainConfig(learning_rate=1e-3, epochs=50, batch_size=len(y), optimizer="sgd", center=False)
    h = train(X, y, cfg).history
    assert all(b <= a + 1e-15 for a, b in zip(h, h[1:]))


def test_strong_l2_shrinks_to_uniform():
    X, y = separable_toy(2)
    weak = train(X, y, TrainConfig(learning_rate=0.1, epochs=100, l2=0.0, optimizer="sgd"))
    strong = train(X, y, TrainConfig(learning_rate=0.01, epochs=300, l2=50.0, optimizer="sgd"))
    assert np.abs(strong.weights).max() < 0.05 * np.abs(weak.weights).max()
    p = predict(strong, X)
    assert np.abs(p[:, [2, 7]] - p[:, [2, 7]].mean()).max() < 0.05


def test_training_deterministic():
    X, y = separable_toy(3)
    a = train(X, y, TrainConfig(epochs=5, seed=4))
    b = train(X, y, TrainConfig(epochs=5, seed=4))
    np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(a.bias, b.bias)


def test_training_errors():
    with pytest.raises(TrainingError):
        train(np.zeros((0, 3)), np.zeros(0, dtype=int))
    X, y = separable_toy()
    with pytest.raises(DivergenceError) as exc:
        train(X * 1e200, y, TrainConfig(learning_rate=1e10, epochs=3, optimizer="sgd", center=False))
    assert exc.value.epoch >= 1


def test_evaluate_contracts():
    X = np.eye(10)
    m = ReadoutModel(np.eye(10) * 5, np.zeros(10), trained=True)
    assert evaluate(m, X, np.arange(10)) == 1.0
    with pytest.raises(EvaluationError):
        evaluate(m, np.zeros((0, 10)), np.zeros(0, dtype=int))


def test_ties_go_to_lowest_class():
    m = ReadoutModel.zeros(3)
    assert predict_labels(m, np.ones((4, 3))).tolist() == [0, 0, 0, 0]


def test_uniform_model_random_labels_at_chance():
    rng = np.random.default_rng(8)
    y = rng.integers(0, 10, 10_000)
    m = ReadoutModel.zeros(2)
    # all classes tie, so every prediction is class 0
    acc = evaluate(m, rng.integers(0, 2, (10_000, 2)), y)
    se = np.sqrt(0.1 * 0.9 / 10_000)
    assert abs(acc - 0.1) < 4 * se


def test_save_load_roundtrip(tmp_path):
    X, y = separable_toy()
    m = train(X, y, TrainConfig(epochs=3))
    m.save(tmp_path / "model")
    assert (tmp_path / "model.json").exists() and (tmp_path / "model.npy").exists()
    back = ReadoutModel.load(tmp_path / "model")
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.bias, m.bias)
    assert back.trained


def test_chunked_prediction_matches_single_pass():
    rng = np.random.default_rng(11)
    m = ReadoutModel(rng.normal(size=(10, 9)), rng.normal(size=10), trained=True)
    X = rng.integers(0, 2, (37, 9)).astype(np.uint8)
    np.testing.assert_array_equal(predict_labels(m, X, chunk=5), predict_labels(m, X))


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 30), F=st.integers(1, 20), seed=st.integers(0, 1000))
def test_packed_rows_roundtrip(n, F, seed):
    X = np.random.default_rng(seed).integers(0, 2, (n, F)).astype(np.uint8)
    P = PackedRows.from_dense(X)
    assert P.shape == X.shape and len(P) == n
    np.testing.assert_array_equal(P[:], X)
    np.testing.assert_array_equal(P[np.array([n - 1, 0])], X[[n - 1, 0]])


def test_training_on_packed_rows_matches_dense():
    rng = np.random.default_rng(12)
    X = rng.integers(0, 2, (60, 21)).astype(np.uint8)
    y = rng.integers(0, 10, 60)
    cfg = TrainConfig(epochs=4, batch_size=16)
    dense, packed = train(X, y, cfg), train(PackedRows.from_dense(X), y, cfg)
    np.testing.assert_array_equal(dense.weights, packed.weights)
    np.testing.assert_array_equal(dense.bias, packed.bias)
    assert evaluate(dense, X, y) == evaluate(packed, PackedRows.from_dense(X), y)
    with pytest.raises(DimensionError):
        PackedRows(np.zeros((2, 2), np.uint8), 30)
