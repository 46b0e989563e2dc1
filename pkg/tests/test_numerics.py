import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gfst.numerics import (
    BackwardError,
    ComplexTensor,
    ConfigError,
    DimensionError,
    Tensor,
    avgpool_padded,
    complex_mul_kernel,
    conv1d,
    dft,
    einsum,
    gelu,
    idft,
    irfft_modes,
    matmul,
    softmax,
)
from gfst.numerics import fft as F
from gfst.numerics.gradcheck import check_gradients, random_projection_loss


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# -- oracles ---------------------------------------------------------------

def matmul_loops(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def conv_sliding(x, kernel):
    T, _ = x.shape
    w, _, cout = kernel.shape
    p = w // 2
    out = np.zeros((T, cout))
    for t in range(T):
        for k in range(w):
            src = min(max(t + k - p, 0), T - 1)
            out[t] += x[src] @ kernel[k]
    return out


def avgpool_scalar(seq, window):
    p = window // 2
    T = len(seq)
    out = []
    for t in range(T):
        total = 0.0
        for k in range(-p, p + 1):
            total += seq[min(max(t + k, 0), T - 1)]
        out.append(total / window)
    return np.array(out)


# -- matmul ----------------------------------------------------------------

def test_matmul_identity(rng):
    A = rng.standard_normal((3, 3))
    np.testing.assert_array_equal(matmul(Tensor(np.eye(3)), Tensor(A)).data, A)


def test_matmul_hand_case():
    out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[0.0], [1.0]]))
    np.testing.assert_array_equal(out.data, [[2.0], [4.0]])


def test_matmul_matches_loops(rng):
    a, b = rng.standard_normal((4, 5)), rng.standard_normal((5, 3))
    np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, matmul_loops(a, b), atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_matmul_batch_broadcast_grad(rng):
    a = Tensor(rng.standard_normal((2, 3, 4)))
    b = Tensor(rng.standard_normal((4, 5)))
    res = check_gradients(lambda: random_projection_loss(matmul(a, b)), [a, b])
    assert all(r.rel_error < 1e-6 for r in res)


# -- conv1d / avgpool ------------------------------------------------------

def test_conv1d_unit_kernel_is_identity(rng):
    x = rng.standard_normal((10, 3))
    k = np.eye(3)[None]
    np.testing.assert_array_equal(conv1d(Tensor(x), Tensor(k)).data, x)


def test_conv1d_constant_series_stays_constant(rng):
    x = np.full((12, 2), 3.5)
    k = rng.standard_normal((3, 2, 4))
    out = conv1d(Tensor(x), Tensor(k)).data
    np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=1e-14)


def test_conv1d_matches_sliding_window(rng):
    x = rng.standard_normal((11, 3))
    k = rng.standard_normal((3, 3, 2))
    np.testing.assert_allclose(conv1d(Tensor(x), Tensor(k)).data, conv_sliding(x, k), atol=1e-12)


def test_conv1d_even_width_rejected():
    with pytest.raises(ConfigError):
        conv1d(Tensor(np.zeros((5, 1))), Tensor(np.zeros((2, 1, 1))))


def test_conv1d_grad(rng):
    x = Tensor(rng.standard_normal((2, 9, 3)))
    k = Tensor(rng.standard_normal((5, 3, 2)))
    res = check_gradients(lambda: random_projection_loss(conv1d(x, k)), {"x": x, "k": k})
    assert max(r.rel_error for r in res) <= 1e-4


def test_avgpool_window_one_is_identity(rng):
    x = rng.standard_normal((7, 2))
    np.testing.assert_array_equal(avgpool_padded(Tensor(x), 1).data, x)


def test_avgpool_constant_exact():
    x = np.full((9, 3), 0.1)
    np.testing.assert_array_equal(avgpool_padded(Tensor(x), 5).data, x)


def test_avgpool_hand_case():
    x = np.array([1.0, 2, 3, 4, 5])[:, None]
    expected = avgpool_scalar([1.0, 2, 3, 4, 5], 3)
    np.testing.assert_allclose(expected, [4 / 3, 2, 3, 4, 14 / 3], atol=1e-15)
    np.testing.assert_allclose(avgpool_padded(Tensor(x), 3).data[:, 0], expected, atol=1e-14)


def test_avgpool_matches_scalar_oracle(rng):
    x = rng.standard_normal((20, 2))
    for w in (3, 7, 25):
        for c in range(2):
            np.testing.assert_allclose(avgpool_padded(Tensor(x), w).data[:, c],
                                       avgpool_scalar(x[:, c], w), atol=1e-12)


def test_avgpool_window_too_large():
    with pytest.raises(ConfigError):
        avgpool_padded(Tensor(np.zeros((3, 1))), 9)


def test_avgpool_grad(rng):
    x = Tensor(rng.standard_normal((2, 15, 3)))
    res = check_gradients(lambda: random_projection_loss(avgpool_padded(x, 7)), [x])
    assert res[0].rel_error <= 1e-4


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.floats(-1e3, 1e3, allow_nan=False), st.sampled_from([1, 3, 5, 9]))
def test_avgpool_constant_property(T, c, w):
    if w > 2 * T + 1:
        return
    x = np.full((T, 2), c)
    assert np.array_equal(avgpool_padded(Tensor(x), w).data, x)


# -- Fourier ---------------------------------------------------------------

def test_fft_zero_input():
    assert np.all(F.fft(np.zeros((16, 2)), axis=0) == 0)


@pytest.mark.parametrize("n", [8, 96, 100, 64, 1, 2, 3])
def test_fft_round_trip(n, rng):
    x = rng.standard_normal((n, 3))
    back = F.ifft(F.fft(x, axis=0), axis=0)
    assert np.max(np.abs(back - x)) <= 1e-9


@pytest.mark.parametrize("n", [8, 12, 32, 96])
def test_fft_matches_direct_sum(n, rng):
    x = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    np.testing.assert_allclose(F.fft(x, axis=0), F.direct_dft(x, axis=0), atol=1e-9)


@pytest.mark.parametrize("n", [8, 96, 100])
def test_parseval(n, rng):
    x = rng.standard_normal((n, 4))
    X = F.fft(x, axis=0)
    lhs = np.sum(x ** 2)
    rhs = np.sum(np.abs(X) ** 2) / n
    assert abs(lhs - rhs) / lhs <= 1e-9


@pytest.mark.parametrize("n", [16, 20])
def test_cosine_energy_at_plus_minus_k(n):
    k = 3
    x = np.cos(2 * np.pi * k * np.arange(n) / n)
    X = F.direct_dft(x)
    Y = F.fft(x)
    np.testing.assert_allclose(Y, X, atol=1e-10)
    mag = np.abs(Y)
    assert set(np.argsort(mag)[-2:]) == {k, n - k}
    np.testing.assert_allclose(mag[[k, n - k]], n / 2, atol=1e-9)
    mask = np.ones(n, bool)
    mask[[k, n - k]] = False
    assert np.max(mag[mask]) < 1e-9


def test_irfft_modes_all_modes_round_trip(rng):
    for n in (8, 9, 96):
        x = rng.standard_normal((n, 2))
        modes = np.arange(n // 2 + 1)
        X = F.fft(x, axis=0)[modes]
        z = F.irfft_modes(X, modes, n, axis=0)
        assert np.max(np.abs(z.imag)) < 1e-10
        np.testing.assert_allclose(z.real, x, atol=1e-10)


def test_dft_idft_tensor_round_trip(rng):
    x = rng.standard_normal((2, 12, 3))
    back = idft(dft(Tensor(x)))
    np.testing.assert_allclose(back.data, x, atol=1e-10)


def test_dft_grad(rng):
    x = Tensor(rng.standard_normal((10, 3)))
    w1 = rng.standard_normal((10, 3))
    w2 = rng.standard_normal((10, 3))

    def f():
        X = dft(x)
        return (X.re * w1).sum() + (X.im * w2).sum()

    assert check_gradients(f, [x])[0].rel_error < 1e-7


def test_idft_grad(rng):
    n = 8
    z = np.fft.fft(rng.standard_normal((n, 2)), axis=0)
    re, im = Tensor(z.real.copy()), Tensor(z.imag.copy())

    def f():
        return random_projection_loss(idft(ComplexTensor(re, im), check_real=None))

    assert max(r.rel_error for r in check_gradients(f, [re, im])) < 1e-7


def test_irfft_modes_grad(rng):
    n = 10
    modes = np.array([0, 2, 3, 5])
    re = Tensor(rng.standard_normal((4, 3)))
    im = Tensor(rng.standard_normal((4, 3)))
    res = check_gradients(lambda: random_projection_loss(irfft_modes(ComplexTensor(re, im), modes, n)), [re, im])
    assert max(r.rel_error for r in res) < 1e-7


# -- complex kernel --------------------------------------------------------

def per_mode_oracle(q, R):
    M, D = q.shape
    out = np.zeros((M, R.shape[1]), dtype=complex)
    for m in range(M):
        for o in range(R.shape[1]):
            for i in range(D):
                out[m, o] += q[m, i] * R[i, o, m]
    return out


def test_complex_kernel_identity(rng):
    M, D = 4, 3
    q = rng.standard_normal((M, D)) + 1j * rng.standard_normal((M, D))
    R = np.repeat(np.eye(D)[:, :, None], M, axis=2).astype(complex)
    out = complex_mul_kernel(ComplexTensor.from_numpy(q), ComplexTensor.from_numpy(R))
    np.testing.assert_array_equal(out.numpy(), q)


def test_complex_kernel_scalar_case():
    q = np.array([[1 + 2j], [3 - 1j]])
    R = np.array([[[2 - 1j, 1j]]])
    out = complex_mul_kernel(ComplexTensor.from_numpy(q), ComplexTensor.from_numpy(R)).numpy()
    np.testing.assert_allclose(out[:, 0], [(1 + 2j) * (2 - 1j), (3 - 1j) * 1j])


def test_complex_kernel_matches_loops(rng):
    M, D, E = 5, 3, 4
    q = rng.standard_normal((M, D)) + 1j * rng.standard_normal((M, D))
    R = rng.standard_normal((D, E, M)) + 1j * rng.standard_normal((D, E, M))
    out = complex_mul_kernel(ComplexTensor.from_numpy(q), ComplexTensor.from_numpy(R)).numpy()
    np.testing.assert_allclose(out, per_mode_oracle(q, R), atol=1e-12)


def test_complex_kernel_shape_error():
    q = ComplexTensor.from_numpy(np.zeros((3, 2)))
    R = ComplexTensor.from_numpy(np.zeros((2, 2, 4)))
    with pytest.raises(DimensionError):
        complex_mul_kernel(q, R)


def test_complex_kernel_grad(rng):
    q = ComplexTensor.from_numpy(rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3)))
    R = ComplexTensor.from_numpy(rng.standard_normal((3, 2, 4)) + 1j * rng.standard_normal((3, 2, 4)))

    def f():
        out = complex_mul_kernel(q, R)
        return random_projection_loss(out.re, 1) + random_projection_loss(out.im, 2)

    res = check_gradients(f, [q.re, q.im, R.re, R.im])
    assert max(r.rel_error for r in res) < 1e-7


# -- softmax ---------------------------------------------------------------

def test_softmax_uniform():
    np.testing.assert_allclose(softmax(Tensor(np.full(4, 2.0))).data, 0.25)


def test_softmax_closed_form():
    np.testing.assert_allclose(softmax(Tensor([0.0, np.log(3.0)])).data, [0.25, 0.75], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_rows_and_shift(x, c):
    y = softmax(Tensor(x), axis=-1).data
    assert np.all(np.abs(y.sum(axis=-1) - 1.0) <= 1e-12)
    assert np.all((y > 0) & (y <= 1))
    np.testing.assert_allclose(softmax(Tensor(x + c), axis=-1).data, y, atol=1e-12)


def test_softmax_mask_zero_prob_and_grad(rng):
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    mask = np.array([[1, 0, 1, 1], [1, 1, 1, 1], [0, 0, 1, 0]], bool)
    y = softmax(x, axis=-1, mask=mask)
    assert np.all(y.data[~mask] == 0)
    random_projection_loss(y).backward()
    assert np.all(x.grad[~mask] == 0)


# -- backward --------------------------------------------------------------

def test_backward_sum_gives_ones(rng):
    x = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 2)))


def test_backward_square(rng):
    xv = rng.standard_normal((4,))
    x = Tensor(xv, requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * xv)


def test_backward_fan_out_accumulates(rng):
    x = Tensor(rng.standard_normal(3), requires_grad=True)
    y = x * 2.0
    (y + y * y).sum().backward()
    np.testing.assert_allclose(x.grad, 2.0 + 8.0 * x.data)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(BackwardError):
        (x * 2.0).backward()


def test_backward_twice_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    with pytest.raises(BackwardError):
        loss.backward()


def test_einsum_and_gelu_grad(rng):
    a = Tensor(rng.standard_normal((2, 3, 4)))
    b = Tensor(rng.standard_normal((4, 5)))
    res = check_gradients(lambda: random_projection_loss(gelu(einsum("btd,de->bte", a, b))), [a, b])
    assert max(r.rel_error for r in res) <= 1e-6


def test_getitem_fancy_accumulates():
    x = Tensor(np.arange(4.0), requires_grad=True)
    x[np.array([0, 0, 2])].sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0, 0.0])


# -- optimizer -----------------------------------------------------------------

def test_adam_first_steps_match_hand_computation():
    from gfst.numerics.optim import Adam, AdamConfig
    from gfst.numerics.module import param

    p = param(np.array([1.0, -2.0]))
    opt = Adam({"p": p}, AdamConfig(lr=0.1))
    grads = [np.array([0.5, -1.0]), np.array([0.2, 0.3])]
    m = v = np.zeros(2)
    x = p.data.copy()
    for t, g in enumerate(grads, start=1):
        p.grad = g
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x = x - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(p.data, x, rtol=0, atol=1e-15)
    # the very first step moves each coordinate by lr against the gradient sign
    q = param(np.zeros(3))
    q.grad = np.array([2.0, -0.01, 5.0])
    Adam({"q": q}, AdamConfig(lr=0.1)).step()
    np.testing.assert_allclose(q.data, [-0.1, 0.1, -0.1], atol=1e-6)  # eps shifts the small one


def test_adam_clip_bounds_the_gradient_norm():
    from gfst.numerics.optim import Adam, AdamConfig
    from gfst.numerics.module import param

    p = param(np.zeros(2))
    opt = Adam({"p": p}, AdamConfig(lr=1.0, grad_clip=1.0))
    p.grad = np.array([30.0, 40.0])
    assert opt.grad_norm() == 50.0
    opt.step()
    assert np.all(np.isfinite(p.data))
