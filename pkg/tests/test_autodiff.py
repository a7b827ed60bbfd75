import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from satformer import autodiff as ad
from satformer.autodiff import Adam, ParamStore, ShapeError, Tape, Tensor, adam_step, param_count

from fdcheck import fd_compare

rng = np.random.default_rng(0)


def T(shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def test_softmax_symmetry():
    assert ad.softmax_rows(Tensor([[0.0, 0.0]])).data.tolist() == [[0.5, 0.5]]


def test_matmul_identity():
    X = rng.standard_normal((2, 5))
    assert np.array_equal(ad.matmul(Tensor(np.eye(2)), Tensor(X)).data, X)


def test_max_pool_rows():
    assert ad.max_pool_rows(Tensor([[1.0, 4.0], [3.0, 2.0]])).data.tolist() == [3.0, 4.0]


def test_sum_gradient_all_ones():
    W = T((2, 2))
    with Tape() as tape:
        loss = ad.sum(W)
    tape.backward(loss)
    assert W.grad.tolist() == [[1.0, 1.0], [1.0, 1.0]]


def test_sigmoid_gradient_at_zero():
    w = Tensor(0.0, requires_grad=True)
    with Tape() as tape:
        loss = ad.mul(ad.sigmoid(w), 1.0)
    tape.backward(loss)
    assert w.grad == pytest.approx(0.25, abs=1e-15)


def test_backward_requires_scalar():
    W = T((2, 2))
    with Tape() as tape:
        out = ad.relu(W)
    with pytest.raises(ShapeError):
        tape.backward(out)


def test_backward_rejects_detached_loss():
    with Tape() as tape:
        T((2,))
    with pytest.raises(ValueError):
        tape.backward(Tensor(1.0))


def test_shape_errors_name_both_shapes():
    with pytest.raises(ShapeError) as exc:
        ad.matmul(T((2, 3)), T((2, 3)))
    assert "(2, 3)" in str(exc.value)
    with pytest.raises(ShapeError):
        ad.add(T((2, 3)), T((3, 2)))


def test_no_tape_records_nothing():
    x = T((3,))
    with Tape() as tape:
        with ad.no_tape():
            ad.relu(x)
    assert len(tape) == 0


PRIMITIVES = {
    "matmul": (lambda a, b: ad.sum(ad.matmul(a, b)), [(3, 4), (4, 2)]),
    "matmul_batched": (lambda a, b: ad.sum(ad.mul(ad.matmul(a, b), ad.matmul(a, b))), [(2, 3, 4), (4, 2)]),
    "add_broadcast": (lambda a, b: ad.sum(ad.mul(ad.add(a, b), ad.add(a, b))), [(3, 4), (4,)]),
    "sub": (lambda a, b: ad.sum(ad.mul(ad.sub(a, b), a)), [(3, 4), (1, 4)]),
    "mul": (lambda a, b: ad.sum(ad.mul(a, b)), [(2, 3), (2, 3)]),
    "relu": (lambda a: ad.sum(ad.mul(ad.relu(a), a)), [(4, 5)]),
    "sigmoid": (lambda a: ad.sum(ad.sigmoid(a)), [(4, 3)]),
    "tanh": (lambda a: ad.sum(ad.mul(ad.tanh(a), a)), [(4, 3)]),
    "log": (lambda a: ad.sum(ad.log(ad.add(ad.mul(a, a), 1.0))), [(3, 3)]),
    "softmax": (lambda a, b: ad.sum(ad.mul(ad.softmax_rows(a), b)), [(3, 4), (3, 4)]),
    "log_softmax": (lambda a, b: ad.sum(ad.mul(ad.log_softmax(a), b)), [(3, 4), (3, 4)]),
    "layer_norm": (lambda a, g, b: ad.sum(ad.mul(ad.layer_norm(a, g, b), a)), [(3, 5), (5,), (5,)]),
    "max_pool": (lambda a: ad.sum(ad.mul(ad.max_pool_rows(a), ad.max_pool_rows(a))), [(4, 3)]),
    "mean": (lambda a: ad.mean(ad.mul(a, a)), [(3, 4)]),
    "sum_axis": (lambda a: ad.sum(ad.mul(ad.sum(a, axis=0), ad.sum(a, axis=0))), [(3, 4)]),
    "linear": (lambda x, w, b: ad.sum(ad.mul(ad.linear(x, w, b), ad.linear(x, w, b))), [(3, 4), (4, 2), (2,)]),
    "scale": (lambda a: ad.sum(ad.mul(ad.scale(a, -2.5), a)), [(3,)]),
    "concat_rows": (lambda a, b: ad.sum(ad.mul(ad.concat_rows([a, b]), ad.concat_rows([b, a]))), [(2, 3), (2, 3)]),
    "concat_cols": (lambda a, b: ad.sum(ad.mul(ad.concat_cols([a, b]), ad.concat_cols([a, b]))), [(2, 3), (2, 1)]),
    "transpose": (lambda a, b: ad.sum(ad.mul(ad.transpose(a), b)), [(2, 3), (3, 2)]),
    "reshape": (lambda a, b: ad.sum(ad.mul(ad.reshape(a, (3, 2)), b)), [(2, 3), (3, 2)]),
    "index": (lambda a: ad.sum(ad.mul(ad.index(a, np.array([0, 2, 2])), ad.index(a, np.array([1, 1, 0])))), [(4,)]),
    "gather_rows": (lambda a: ad.sum(ad.mul(ad.gather_rows(a, [0, 2, 2, 1]), ad.gather_rows(a, [1, 1, 0, 2]))), [(3, 2)]),
    "scatter_add": (lambda a: ad.sum(ad.mul(ad.scatter_add_rows(a, [0, 2, 2, 1], 3), ad.scatter_add_rows(a, [0, 2, 2, 1], 3))), [(4, 2)]),
    "segment_max": (lambda a: ad.sum(ad.mul(ad.segment_max_rows(a, np.array([0, 0, 1, 1, 1]), 2), ad.segment_max_rows(a, np.array([0, 0, 1, 1, 1]), 2))), [(5, 3)]),
    "segment_log_softmax": (lambda a, b: ad.sum(ad.mul(ad.segment_log_softmax(a, np.array([0, 0, 1, 1, 1]), 2), b)), [(5,), (5,)]),
    "clip": (lambda a: ad.sum(ad.mul(ad.clip(a, -0.5, 0.5), a)), [(4, 4)]),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    fn, shapes = PRIMITIVES[name]
    local = np.random.default_rng(zlib.crc32(name.encode()))
    tensors = [Tensor(local.standard_normal(s), requires_grad=True) for s in shapes]
    assert fd_compare(lambda: fn(*tensors), tensors) < 1e-4


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(-50, 50)))
def test_softmax_rows_normalised(x):
    y = ad.softmax_rows(Tensor(x)).data
    assert np.all(y >= 0)
    assert np.allclose(y.sum(axis=-1), 1.0, atol=1e-9)


def test_softmax_handles_large_logits():
    y = ad.softmax_rows(Tensor([[1000.0, 0.0, -1000.0]])).data
    assert np.isfinite(y).all() and y[0, 0] == pytest.approx(1.0)


def test_forward_is_deterministic():
    a = rng.standard_normal((4, 4))
    f = lambda: ad.softmax_rows(ad.matmul(Tensor(a), Tensor(a))).data
    assert np.array_equal(f(), f())


def test_param_store_order_and_count():
    s = ParamStore()
    s.add("b", np.zeros((4, 4)))
    s.add("a", np.zeros(3))
    assert list(s) == ["b", "a"]
    assert param_count(s) == 19
    with pytest.raises(KeyError):
        s.add("a", np.zeros(1))


def test_single_matrix_count():
    s = ParamStore()
    s.add("W", np.zeros((4, 4)))
    assert param_count(s) == 16


def _scalar_store(value=1.0):
    s = ParamStore()
    s.add("p", np.array([value]))
    return s


def test_adam_zero_gradient_no_change():
    s = _scalar_store()
    s["p"].grad = np.zeros(1)
    adam_step(s, lr=1e-4, weight_decay=0.0)
    assert s["p"].data.tolist() == [1.0]


def test_adam_first_step():
    s = _scalar_store()
    s["p"].grad = np.ones(1)
    adam_step(s, lr=1e-4)
    assert s["p"].data[0] == pytest.approx(1.0 - 1e-4, abs=1e-11)


def test_adam_weight_decay_factor():
    s = _scalar_store(2.0)
    s["p"].grad = np.zeros(1)
    adam_step(s, lr=1e-4, weight_decay=1e-10)
    assert s["p"].data[0] == 2.0 * (1 - 1e-4 * 1e-10)


def test_adam_requires_gradients():
    s = _scalar_store()
    with pytest.raises(ValueError):
        Adam(s).step()


def test_adam_state_carries_over():
    s = _scalar_store()
    state = None
    for _ in range(3):
        s["p"].grad = np.ones(1)
        state = adam_step(s, state, lr=0.1)
    assert state.step_count == 3
    assert s["p"].data[0] == pytest.approx(1.0 - 0.3, abs=1e-6)
