import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcdnpe.fixed import quantize_relu, quantize_relu_array, wrap_signed
from tcdnpe.goldref import MlpModel, exact_dot, layer_forward, mlp_forward

word = st.integers(-32768, 32767)


def test_exact_dot_examples():
    assert exact_dot([]) == 0
    assert exact_dot([(-1, 1), (1, 1)]) == 0


@given(st.lists(st.tuples(word, word)))
def test_exact_dot_is_native_integer_sum(ps):
    assert exact_dot(ps) == wrap_signed(sum(a * b for a, b in ps), 48)
    assert exact_dot(list(reversed(ps))) == exact_dot(ps)


def test_wrap_signed():
    assert wrap_signed(1 << 47) == -(1 << 47)
    assert wrap_signed(-1) == -1


def test_quantize_relu():
    assert quantize_relu(-5) == 0
    assert quantize_relu(0) == 0
    assert quantize_relu(1 << 30) == 32767
    assert quantize_relu(256 * 3 + 255) == 3
    assert list(quantize_relu_array(np.array([-5, 0, 1 << 30, 1023]))) == [0, 0, 32767, 3]


def test_zero_weights_give_zero():
    m = MlpModel([3, 4, 2], [np.zeros((3, 4)), np.zeros((4, 2))])
    out = mlp_forward(m, [[1, 2, 3]])
    assert all((o == 0).all() for o in out)


@pytest.mark.parametrize("x", [0, 1, 255, 256, 32767])
def test_identity_model(x):
    m = MlpModel([1, 1], [np.array([[256]])])
    assert mlp_forward(m, [[x]])[-1][0, 0] == x


def test_dimension_checks():
    with pytest.raises(ValueError):
        MlpModel([3, 2], [np.zeros((2, 3))])
    with pytest.raises(ValueError):
        MlpModel([3], [])
    with pytest.raises(ValueError):
        MlpModel([1, 1], [np.array([[40000]])])
    m = MlpModel([3, 2], [np.zeros((3, 2))])
    with pytest.raises(ValueError):
        mlp_forward(m, [[1, 2]])


def test_batch_order_independent():
    rng = np.random.default_rng(0)
    m = MlpModel.random([6, 5, 3], rng)
    x = rng.integers(0, 256, (4, 6))
    a = mlp_forward(m, x)[-1]
    b = mlp_forward(m, x[::-1])[-1]
    assert np.array_equal(a, b[::-1])


def test_layer_forward_matches_numpy():
    rng = np.random.default_rng(1)
    w = rng.integers(-256, 256, (20, 7))
    x = rng.integers(0, 256, 20)
    expect = np.clip(np.maximum(x @ w, 0) >> 8, 0, 32767)
    assert layer_forward(x, w) == list(expect)


def test_random_model_is_seeded():
    a = MlpModel.random([4, 10, 5, 3], np.random.default_rng(9))
    b = MlpModel.random([4, 10, 5, 3], np.random.default_rng(9))
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert all(w.min() >= -256 and w.max() <= 255 for w in a.weights)
