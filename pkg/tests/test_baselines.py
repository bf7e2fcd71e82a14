import numpy as np
import pytest

from lyricgauge import BaselineError, linear_train, majority_predict
from lyricgauge.baselines import _binary_loss


def test_majority_prefers_most_frequent():
    assert majority_predict([0, 0, 1, 2, 0]) == 0
    assert majority_predict([2, 2, 2, 1]) == 2


def test_majority_ties_go_lower():
    assert majority_predict([1, 2, 1, 2]) == 1
    assert majority_predict([0, 2, 2, 0]) == 0
    assert majority_predict([2, 1, 0]) == 0


def test_majority_rejects_empty():
    with pytest.raises(BaselineError):
        majority_predict([])


def _blobs(rng, n_per=30):
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    X = np.concatenate([c + rng.normal(scale=0.4, size=(n_per, 2)) for c in centers])
    y = np.repeat([0, 1, 2], n_per)
    return X, y


def test_linear_train_fits_separable_blobs():
    rng = np.random.default_rng(0)
    X, y = _blobs(rng)
    model = linear_train(X, y, seed=0)
    assert (model.predict(X) == y).mean() >= 0.99


def test_linear_train_is_deterministic():
    rng = np.random.default_rng(1)
    X, y = _blobs(rng)
    a = linear_train(X, y, seed=3)
    b = linear_train(X, y, seed=3)
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.b, b.b)


def test_linear_train_loss_never_increases():
    # descent with backtracking must end at a loss no worse than the start
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 3))
    y = rng.integers(0, 3, size=40)
    model = linear_train(X, y, max_iter=50, seed=1)
    start = np.random.default_rng(1)
    for c in range(3):
        yc = (y == c).astype(float)
        w0 = start.normal(scale=0.01, size=3)
        assert (_binary_loss(model.W[c], float(model.b[c]), X, yc, 1e-4)
                <= _binary_loss(w0, 0.0, X, yc, 1e-4) + 1e-12)


def test_linear_train_warns_on_absent_class(caplog):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 2))
    y = np.zeros(20, dtype=int)  # classes 1 and 2 never appear
    with caplog.at_level("WARNING"):
        model = linear_train(X, y, seed=0)
    assert "degenerate" in caplog.text
    assert (model.predict(X) == 0).all()


def test_linear_train_rejects_bad_shapes():
    with pytest.raises(BaselineError):
        linear_train(np.zeros((0, 2)), [])
    with pytest.raises(BaselineError):
        linear_train(np.zeros((4, 2)), [0, 1])


def test_prediction_ties_resolve_to_lower_class():
    from lyricgauge.baselines import LinearModel
    model = LinearModel(W=np.zeros((3, 2)), b=np.zeros(3))  # all scores equal
    X = np.ones((4, 2))
    np.testing.assert_array_equal(model.predict(X), 0)
