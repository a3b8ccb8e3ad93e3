import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revgnn import numcore as nc
from revgnn.errors import InputError, NumericalError, ShapeError
from revgnn.numcore import AdamState, Tensor, adam_step, grad_check, normalize_adjacency


def param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def dense_normalized(edges, n):
    """Reference D^-1/2 (A+I) D^-1/2 built with loops over a dense array."""
    a = np.eye(n)
    for i, j in edges:
        if i != j:
            a[i, j] = a[j, i] = 1.0
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


# -- adjacency ---------------------------------------------------------------

def test_single_node_is_one():
    assert normalize_adjacency([], 1).todense().tolist() == [[1.0]]


def test_two_nodes_one_edge():
    np.testing.assert_array_equal(normalize_adjacency([(0, 1)], 2).todense(), [[0.5, 0.5], [0.5, 0.5]])


def test_path_entry():
    a = normalize_adjacency([(0, 1), (1, 2)], 3).todense()
    assert a[0, 1] == pytest.approx(1 / math.sqrt(6), abs=1e-15)


def test_out_of_range_names_pair():
    with pytest.raises(InputError, match=r"\(1, 5\)"):
        normalize_adjacency([(0, 1), (1, 5)], 3)


def test_duplicates_and_orientation_collapse():
    a = normalize_adjacency([(0, 1), (1, 0), (0, 1)], 2)
    assert a == normalize_adjacency([(0, 1)], 2)


edge_lists = st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=80)))


@given(edge_lists)
@settings(max_examples=60, deadline=None)
def test_adjacency_matches_dense_reference(case):
    n, edges = case
    a = normalize_adjacency(edges, n)
    assert a.is_symmetric()
    assert np.all(a.data > 0)
    np.testing.assert_allclose(a.todense(), dense_normalized(edges, n), rtol=0, atol=1e-15)
    assert np.all(np.diag(a.todense()) > 0)


@given(edge_lists, st.integers(1, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_spmm_equals_dense_product(case, cols, seed):
    n, edges = case
    a = normalize_adjacency(edges, n)
    h = np.random.default_rng(seed).normal(size=(n, cols))
    np.testing.assert_allclose(nc.spmm(a, h).data, a.todense() @ h, rtol=0, atol=1e-12)


def test_spmm_examples():
    eye = normalize_adjacency([], 3)
    h = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(nc.spmm(eye, h).data, h)
    half = normalize_adjacency([(0, 1)], 2)
    np.testing.assert_array_equal(nc.spmm(half, np.eye(2)).data, [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(nc.spmm(half, np.zeros((2, 3))).data, np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        nc.spmm(half, np.zeros((3, 1)))


# -- elementwise examples ----------------------------------------------------

def test_activation_examples():
    assert nc.relu(np.array([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]
    assert nc.prelu(np.array([-2.0]), Tensor(np.array(0.25))).data.tolist() == [-0.5]
    assert nc.concat([np.array([1.0, 2.0]), np.array([3.0])], axis=0).data.tolist() == [1.0, 2.0, 3.0]


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        nc.matmul(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        nc.add(np.zeros((2, 3)), np.zeros((3, 2)))


# -- backward ----------------------------------------------------------------

def test_sum_of_squares_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (g,) = nc.backward(nc.tsum(nc.mul(x, x)), [x])
    np.testing.assert_array_equal(g, [2.0, 4.0])


def test_constant_loss_gives_zero_gradients():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (g,) = nc.backward(nc.tsum(Tensor(np.array([3.0]))), [x])
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_sigmoid_zero_times_c():
    c = Tensor(np.array(4.0), requires_grad=True)
    (g,) = nc.backward(nc.mul(nc.sigmoid(np.array(0.0)), c), [c])
    assert g == 0.5


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        nc.backward(nc.mul(x, x))


def test_unreachable_parameter_gets_exact_zero():
    x = Tensor(np.ones(3), requires_grad=True)
    y = Tensor(np.ones(2), requires_grad=True)
    gx, gy = nc.backward(nc.tsum(x), [x, y])
    np.testing.assert_array_equal(gy, np.zeros(2))
    np.testing.assert_array_equal(gx, np.ones(3))


def test_backward_visits_each_node_once(rng):
    w = param(rng, 4, 4)
    x = Tensor(rng.normal(size=(3, 4)))
    h = nc.relu(nc.matmul(x, w))
    # h is reused three times; a tree walk would revisit it
    loss = nc.tsum(nc.mul(h, h)) + nc.tsum(h) + nc.mean(nc.sigmoid(h))
    trace = []
    nc.backward(loss, [w], trace=trace)
    ids = [id(t) for t in trace]
    assert len(ids) == len(set(ids))
    assert id(h) in ids and id(w) in ids
    assert ids.index(id(loss)) == 0


def test_no_grad_records_nothing(rng):
    w = param(rng, 2, 2)
    with nc.no_grad():
        out = nc.matmul(w, w)
    assert not out.requires_grad and not out.parents


def test_non_finite_forward_raises():
    with pytest.raises(NumericalError):
        nc.log(np.array([-1.0]))


# -- gradient checks per primitive -------------------------------------------

def _check(f, params, tol=1e-4):
    assert grad_check(f, params) < tol


def test_grad_check_linear_and_quadratic(rng):
    # near the origin the central difference is free of cancellation error
    x = Tensor(np.zeros(5), requires_grad=True)
    a = np.array([1.0, -2.0, 3.0, 0.5, 4.0])
    assert grad_check(lambda: nc.tsum(nc.mul(a, x)), [x]) < 1e-10
    x = param(rng, 5)
    assert grad_check(lambda: nc.tsum(nc.mul(x, x)), [x]) < 1e-8


def test_grad_check_raises_on_non_finite():
    x = Tensor(np.array([1e-7]), requires_grad=True)
    with pytest.raises(NumericalError):
        grad_check(lambda: nc.tsum(nc.log(x)), [x], eps=1e-6 * 1e2)


@pytest.mark.parametrize("name", ["add", "sub", "mul", "div", "matmul"])
def test_binary_op_gradients(name, rng):
    a = param(rng, 3, 4)
    b = param(rng, 3, 4) if name != "matmul" else param(rng, 4, 2)
    if name == "div":
        b.data[...] = np.abs(b.data) + 0.5
    op = getattr(nc, name)
    w = rng.normal(size=op(a, b).shape)
    _check(lambda: nc.tsum(nc.mul(op(a, b), w)), [a, b])


@pytest.mark.parametrize("name", ["exp", "relu", "sigmoid", "transpose"])
def test_unary_op_gradients(name, rng):
    x = param(rng, 3, 4)
    # keep relu away from its kink
    x.data[np.abs(x.data) < 1e-2] = 0.5
    op = getattr(nc, name)
    w = rng.normal(size=op(x).shape)
    _check(lambda: nc.tsum(nc.mul(op(x), w)), [x])


def test_log_clip_prelu_gradients(rng):
    x = param(rng, 6)
    x.data[...] = np.abs(x.data) + 0.3
    _check(lambda: nc.tsum(nc.log(x)), [x])
    y = param(rng, 6)
    y.data[np.abs(y.data) < 1e-2] = 0.4
    slope = Tensor(np.array(0.25), requires_grad=True)
    w = rng.normal(size=6)
    _check(lambda: nc.tsum(nc.mul(nc.prelu(y, slope), w)), [y, slope])
    z = Tensor(np.array([0.2, 0.5, 0.8]), requires_grad=True)
    _check(lambda: nc.tsum(nc.mul(nc.clip(z, 0.1, 0.9), w[:3])), [z])


def test_reduction_and_indexing_gradients(rng):
    x = param(rng, 4, 3)
    b = param(rng, 3)
    w = rng.normal(size=(5, 3))
    idx = np.array([0, 2, 2, 3, 1])
    _check(lambda: nc.tsum(nc.mul(nc.take_rows(nc.add_bias(x, b), idx), w)), [x, b])
    w4, w3, w26 = rng.normal(size=4), rng.normal(size=3), rng.normal(size=(2, 6))
    _check(lambda: nc.tsum(nc.mul(nc.rowsum(x), w4)), [x])
    _check(lambda: nc.mean(nc.mul(x, x)), [x])
    _check(lambda: nc.tsum(nc.mul(nc.tsum(x, axis=0), w3)), [x])
    cols = np.array([[0, 0], [2, 1], [1, 1], [2, 0]])
    wc = rng.normal(size=(4, 2))
    _check(lambda: nc.tsum(nc.mul(nc.take_along_rows(x, cols), wc)), [x])
    _check(lambda: nc.tsum(nc.mul(nc.reshape(x, (2, 6)), w26)), [x])
    y = param(rng, 4, 2)
    wcat = rng.normal(size=(4, 5))
    _check(lambda: nc.tsum(nc.mul(nc.concat([x, y], axis=1), wcat)), [x, y])


def test_spmm_gradient(rng):
    a = normalize_adjacency([(0, 1), (1, 2), (2, 3)], 5)
    h = param(rng, 5, 3)
    w = rng.normal(size=(5, 3))
    _check(lambda: nc.tsum(nc.mul(nc.spmm(a, h), w)), [h])


def test_outer_linear_matches_explicit_outer_product(rng):
    hp = param(rng, 2, 3, 4)
    hv = param(rng, 2, 4)
    w = param(rng, 16, 5)
    got = nc.outer_linear(hp, hv, w).data
    want = np.einsum("bkj,bl->bkjl", hp.data, hv.data).reshape(2, 3, 16) @ w.data
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    g = rng.normal(size=got.shape)
    _check(lambda: nc.tsum(nc.mul(nc.outer_linear(hp, hv, w), g)), [hp, hv, w])


def test_weighted_sum_gradient(rng):
    a = param(rng, 2, 3)
    hp = param(rng, 2, 3, 4)
    g = rng.normal(size=(2, 4))
    np.testing.assert_allclose(nc.weighted_sum(a, hp).data, np.einsum("bk,bkd->bd", a.data, hp.data))
    _check(lambda: nc.tsum(nc.mul(nc.weighted_sum(a, hp), g)), [a, hp])


# -- Adam --------------------------------------------------------------------

def test_adam_zero_grad_leaves_params():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    adam_step(AdamState(1e-3), p, {"w": np.zeros(2)})
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])


def test_adam_first_step():
    p = {"w": Tensor(np.array([0.0]), requires_grad=True)}
    adam_step(AdamState(1e-3), p, {"w": np.array([1.0])})
    # m_hat = 1, v_hat = 1, step = lr / (1 + eps)
    assert p["w"].data[0] == pytest.approx(-1e-3 / (1 + 1e-8), abs=1e-15)


def test_adam_constant_grad_moves_monotonically():
    p = {"w": Tensor(np.array([0.0]), requires_grad=True)}
    state = AdamState(1e-2)
    trail = []
    for _ in range(3):
        adam_step(state, p, {"w": np.array([0.7])})
        trail.append(p["w"].data[0])
    assert trail[0] < 0 and trail[1] < trail[0] and trail[2] < trail[1]
    assert state.step == 3


def test_adam_rejects_non_finite_and_names_tensor():
    p = {"decoder.w": Tensor(np.zeros(2), requires_grad=True)}
    with pytest.raises(NumericalError, match="decoder.w"):
        adam_step(AdamState(1e-3), p, {"decoder.w": np.array([np.nan, 0.0])})


def test_adam_zero_rate_freezes_exactly():
    w = Tensor(np.array([0.3, -0.1]), requires_grad=True)
    before = w.data.copy()
    state = AdamState(0.0)
    for _ in range(4):
        adam_step(state, {"w": w}, {"w": np.array([1.0, -5.0])})
    assert np.array_equal(w.data, before)
