import numpy as np
import pytest

from gfst.errors import ValidationError
from gfst.gatblock import GraphAttention, gat_block, gat_layer, gat_scores, tst_shift
from gfst.graphbuild import ComplexAdjacency
from gfst.numerics import Tensor
from gfst.numerics.gradcheck import check_gradients, random_projection_loss


def leaky(x):
    return x if x > 0 else 0.2 * x


def random_graph(rng, n, p=0.5):
    a = (rng.random((n, n)) < p).astype(int)
    a = np.triu(a, 1)
    a = a + a.T + np.eye(n, dtype=int)
    return a


def scores_oracle(h, gat, a):
    """Per-node loops over the neighborhood, one head at a time."""
    n = h.shape[0]
    out = np.zeros((gat.heads, n, n))
    for k, head in enumerate(gat.head):
        Wh = h @ head.W.data
        for i in range(n):
            nbrs = [j for j in range(n) if a[i, j] == 1]
            e = np.array([leaky(Wh[i] @ head.attn.data[0] + Wh[j] @ head.attn.data[1]) for j in nbrs])
            w = np.exp(e - e.max())
            w /= w.sum()
            for j, v in zip(nbrs, w):
                out[k, i, j] = v
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def one_step(h):
    return Tensor(h[None, None])


def test_self_only_node_attends_to_itself(rng):
    gat = GraphAttention(3, 4, 2, rng)
    alpha, _ = gat_scores(one_step(rng.standard_normal((3, 3))), gat, np.eye(3, dtype=int))
    np.testing.assert_array_equal(alpha.data[0, 0], np.broadcast_to(np.eye(3), (2, 3, 3)))


def test_identical_neighbor_gets_half(rng):
    gat = GraphAttention(2, 3, 1, rng)
    v = rng.standard_normal(2)
    h = np.stack([v, v])
    alpha, _ = gat_scores(one_step(h), gat, np.ones((2, 2), dtype=int))
    np.testing.assert_allclose(alpha.data[0, 0, 0], 0.5, atol=1e-15)


def test_scores_match_loop_oracle(rng):
    gat = GraphAttention(4, 3, 2, rng)
    a = random_graph(rng, 5)
    h = rng.standard_normal((5, 4))
    alpha, _ = gat_scores(one_step(h), gat, a)
    np.testing.assert_allclose(alpha.data[0, 0], scores_oracle(h, gat, a), atol=1e-12)
    sums = alpha.data.sum(axis=-1)
    assert np.all(np.abs(sums - 1) <= 1e-12)
    assert np.all(alpha.data[0, 0][:, a == 0] == 0)


def test_single_node_identity_weights_gives_elu(rng):
    gat = GraphAttention(3, 3, 1, rng)
    gat.head[0].W.data = np.eye(3)
    h = np.array([[0.5, -1.0, 2.0]])
    out = gat_layer(one_step(h), gat, np.ones((1, 1), dtype=int)).data[0, 0, 0]
    np.testing.assert_allclose(out, [0.5, np.expm1(-1.0), 2.0], atol=1e-15)


def test_uniform_over_identical_neighbors_equals_single(rng):
    gat = GraphAttention(2, 3, 2, rng)
    for head in gat.head:
        head.attn.data[:] = 0.0  # scores all equal -> uniform weights
    v = rng.standard_normal(2)
    pair = gat_layer(one_step(np.stack([v, v])), gat, np.ones((2, 2), dtype=int)).data[0, 0, 0]
    single = gat_layer(one_step(v[None]), gat, np.ones((1, 1), dtype=int)).data[0, 0, 0]
    np.testing.assert_allclose(pair, single, atol=1e-15)


def test_gat_layer_gradient(rng):
    gat = GraphAttention(3, 2, 2, rng)
    a = random_graph(rng, 4)
    h = Tensor(rng.standard_normal((2, 3, 4, 3)))
    params = {"h": h, **gat.named_parameters()}
    res = check_gradients(lambda: random_projection_loss(gat_layer(h, gat, a)), params)
    assert max(r.rel_error for r in res) <= 1e-4, res


def test_non_neighbor_has_exactly_zero_influence(rng):
    gat = GraphAttention(3, 4, 2, rng)
    n = 6
    a = random_graph(rng, n, 0.4)
    h = rng.standard_normal((1, 2, n, 3))
    base = gat_layer(Tensor(h), gat, a).data
    for i in range(n):
        for j in range(n):
            if a[i, j]:
                continue
            bumped = h.copy()
            bumped[:, :, j] += rng.standard_normal(3) * 10
            assert np.array_equal(gat_layer(Tensor(bumped), gat, a).data[:, :, i], base[:, :, i])


def test_non_neighbor_gradient_is_exactly_zero(rng):
    gat = GraphAttention(3, 4, 2, rng)
    a = np.array([[1, 1, 0, 0], [1, 1, 1, 0], [0, 1, 1, 1], [0, 0, 1, 1]])
    h = Tensor(rng.standard_normal((1, 1, 4, 3)), requires_grad=True)
    gat_layer(h, gat, a, rows=[0]).sum().backward()
    assert np.all(h.grad[0, 0, 2:] == 0)
    assert np.any(h.grad[0, 0, :2] != 0)


def test_permutation_equivariance(rng):
    gat = GraphAttention(3, 4, 3, rng)
    n = 7
    a = random_graph(rng, n)
    h = rng.standard_normal((2, 3, n, 3))
    perm = rng.permutation(n)
    out = gat_layer(Tensor(h), gat, a).data
    out_p = gat_layer(Tensor(h[:, :, perm]), gat, a[np.ix_(perm, perm)]).data
    np.testing.assert_allclose(out_p, out[:, :, perm], atol=1e-10)


# -- lag alignment -----------------------------------------------------------

def test_tst_zero_lags_is_identity(rng):
    x = rng.standard_normal((2, 10, 3, 2))
    out = tst_shift(Tensor(x), np.zeros((3, 3), int), target=0)
    np.testing.assert_array_equal(out.data, x)


def test_tst_shift_by_two(rng):
    T = 8
    x = rng.standard_normal((1, T, 2, 1))
    b = np.array([[0, -2], [2, 0]])  # node 1 leads the target (node 0) by 2 steps
    out = tst_shift(Tensor(x), b, target=0).data
    expected = np.array([x[0, max(t - 2, 0), 1, 0] for t in range(T)])
    np.testing.assert_array_equal(out[0, :, 1, 0], expected)
    np.testing.assert_array_equal(out[0, :, 0], x[0, :, 0])


def test_tst_shift_and_back_interior(rng):
    T, lag = 12, 3
    x = rng.standard_normal((1, T, 2, 2))
    fwd = np.array([[0, -lag], [lag, 0]])
    there = tst_shift(Tensor(x), fwd, target=0)
    back = tst_shift(there, -fwd, target=0).data
    np.testing.assert_array_equal(back[0, lag:T - lag, 1], x[0, lag:T - lag, 1])


def test_tst_leaves_non_neighbors(rng):
    x = rng.standard_normal((1, 6, 3, 1))
    a = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]])
    b = np.array([[0, 2, 1], [-2, 0, 0], [-1, 0, 0]])
    out = tst_shift(Tensor(x), b, target=0, a=a).data
    np.testing.assert_array_equal(out[0, :, 1], x[0, :, 1])


def test_tst_bad_target(rng):
    with pytest.raises(ValidationError):
        tst_shift(Tensor(np.zeros((1, 4, 2, 1))), np.zeros((2, 2), int), target=5)


# -- full block ---------------------------------------------------------------

def test_block_self_only_identity_weights(rng):
    gat = GraphAttention(2, 2, 1, rng)
    gat.head[0].W.data = np.eye(2)
    x = rng.standard_normal((1, 5, 3, 2))
    adj = ComplexAdjacency(np.eye(3, dtype=int), np.zeros((3, 3), int))
    out = gat_block(Tensor(x), adj, gat, target=1).data
    expected = np.where(x[:, :, 1] > 0, x[:, :, 1], np.expm1(np.minimum(x[:, :, 1], 0)))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_block_sensitivity_follows_planted_lag(rng):
    gat = GraphAttention(2, 3, 2, rng)
    T, L = 12, 3
    x = rng.standard_normal((1, T, 2, 2))
    # target 0; neighbor 1 is upwind: the target sees its signal L steps later
    adj = ComplexAdjacency(np.ones((2, 2), int), np.array([[0, -L], [L, 0]]))
    base = gat_block(Tensor(x), adj, gat, target=0).data
    t = 8
    early = x.copy()
    early[0, t - L, 1] += 1.0
    assert not np.allclose(gat_block(Tensor(early), adj, gat, target=0).data[0, t], base[0, t])
    same = x.copy()
    same[0, t, 1] += 1.0
    assert np.array_equal(gat_block(Tensor(same), adj, gat, target=0).data[0, t], base[0, t])


def test_block_gradient(rng):
    gat = GraphAttention(3, 2, 2, rng)
    n = 4
    a = random_graph(rng, n, 0.7)
    b = np.triu(rng.integers(-2, 3, (n, n)), 1)
    b = (b - b.T) * a
    x = Tensor(rng.standard_normal((2, 9, n, 3)))
    params = {"x": x, **gat.named_parameters()}
    res = check_gradients(lambda: random_projection_loss(gat_block(x, (a, b), gat, 2)), params)
    assert max(r.rel_error for r in res) <= 1e-4, res


def test_parameter_names(rng):
    gat = GraphAttention(3, 2, 2, rng)
    assert sorted(gat.named_parameters()) == ["head0.W", "head0.attn", "head1.W", "head1.attn"]
