"""Differentiable building blocks on top of :mod:`gfst.numerics.tensor`.

Time always runs along axis -2 and channels along axis -1; leading axes are
batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fft as _fft
from .tensor import ConfigError, DimensionError, Tensor, as_tensor, einsum, matmul, take


# -- activations ------------------------------------------------------------

def softmax(x: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Numerically stable softmax. Masked-out entries (mask False) get exactly 0
    probability and exactly 0 gradient. Every slice must keep at least one entry."""
    x = as_tensor(x)
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._make(y, (x,), bw)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    d = np.where(x.data > 0, 1.0, slope)
    return Tensor._make(x.data * d, (x,), lambda g: (g * d,))


def elu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    em1 = np.expm1(np.minimum(x.data, 0.0))
    y = np.where(pos, x.data, em1)
    d = np.where(pos, 1.0, em1 + 1.0)
    return Tensor._make(y, (x,), lambda g: (g * d,))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh approximation of GELU."""
    x = as_tensor(x)
    v = x.data
    v2 = v * v
    t = np.tanh(_GELU_C * v * (1.0 + 0.044715 * v2))
    half = 0.5 * (1.0 + t)
    y = v * half
    d = half + 0.5 * v * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v2)
    return Tensor._make(y, (x,), lambda g: (g * d,))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    y = matmul(x, weight)
    return y + bias if bias is not None else y


# -- convolution and pooling ------------------------------------------------

def replicate_index(T: int, left: int, right: int) -> np.ndarray:
    return np.clip(np.arange(-left, T + right), 0, T - 1)


def conv1d(x: Tensor, kernel: Tensor) -> Tensor:
    """Cross-correlation along time with replicate-edge padding.

    x: [..., T, C_in], kernel: [w, C_in, C_out] with w odd. Output [..., T, C_out].
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if kernel.ndim != 3:
        raise DimensionError(f"conv1d kernel must be [w, C_in, C_out], got {kernel.shape}")
    w = kernel.shape[0]
    if w % 2 == 0:
        raise ConfigError(f"conv1d kernel width must be odd, got {w}")
    if x.shape[-1] != kernel.shape[1]:
        raise DimensionError(f"conv1d channel mismatch: input {x.shape} vs kernel {kernel.shape}")
    T = x.shape[-2]
    p = w // 2
    if p == 0:
        return matmul(x, kernel[0])
    xp = _take_rows(x, replicate_index(T, p, p))
    out = None
    for k in range(w):
        term = matmul(xp[..., k:k + T, :], kernel[k])
        out = term if out is None else out + term
    return out


def _take_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Gather along axis -2 with possibly repeated indices."""
    data = x.data[..., idx, :]
    shape = x.shape

    def bw(g):
        full = np.zeros(shape)
        np.add.at(full, (Ellipsis, idx, slice(None)), g)
        return (full,)

    return Tensor._make(data, (x,), bw)


@lru_cache(maxsize=128)
def avgpool_matrix(T: int, window: int) -> np.ndarray:
    """T x T operator of the replicate-padded moving average."""
    p = window // 2
    idx = replicate_index(T, p, p)
    A = np.zeros((T, T))
    for t in range(T):
        np.add.at(A[t], idx[t:t + window], 1.0 / window)
    A.setflags(write=False)
    return A


def avgpool_padded(x: Tensor, window: int) -> Tensor:
    """Moving average over time with replicate-edge padding; output length T.

    Computed as x[t] + mean_k(x[t+k] - x[t]) so a constant series maps to
    itself bit for bit.
    """
    x = as_tensor(x)
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"avgpool window must be odd and >= 1, got {window}")
    T = x.shape[-2]
    if window > 2 * T + 1:
        raise ConfigError(f"avgpool window {window} too large for length {T}")
    if window == 1:
        return Tensor._make(x.data.copy(), (x,), lambda g: (g,))
    p = window // 2
    idx = replicate_index(T, p, p)
    xp = x.data[..., idx, :]
    acc = np.zeros_like(x.data)
    for k in range(window):
        acc += xp[..., k:k + T, :] - x.data
    y = x.data + acc / window
    A = avgpool_matrix(T, window)

    def bw(g):
        return (np.swapaxes(A, 0, 1) @ g,)

    return Tensor._make(y, (x,), bw)


# -- complex values and Fourier transforms ---------------------------------

@dataclass
class ComplexTensor:
    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise DimensionError(f"real/imag shape mismatch: {self.re.shape} vs {self.im.shape}")

    @property
    def shape(self) -> tuple:
        return self.re.shape

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    @classmethod
    def from_numpy(cls, z: np.ndarray, requires_grad: bool = False) -> "ComplexTensor":
        return cls(Tensor(np.real(z).copy(), requires_grad), Tensor(np.imag(z).copy(), requires_grad))

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def take_modes(self, modes: np.ndarray, axis: int = -2) -> "ComplexTensor":
        return ComplexTensor(take(self.re, modes, axis), take(self.im, modes, axis))

    def tanh(self) -> "ComplexTensor":
        """Elementwise tanh applied separately to real and imaginary parts."""
        return ComplexTensor(self.re.tanh(), self.im.tanh())


def complex_einsum(spec: str, a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    rr = einsum(spec, a.re, b.re)
    ii = einsum(spec, a.im, b.im)
    ri = einsum(spec, a.re, b.im)
    ir = einsum(spec, a.im, b.re)
    return ComplexTensor(rr - ii, ri + ir)


def complex_mul_kernel(q: ComplexTensor, R: ComplexTensor) -> ComplexTensor:
    """Per-mode complex matrix product: out[..., m, :] = q[..., m, :] @ R[:, :, m].

    q: [..., M, D_in], R: [D_in, D_out, M].
    """
    if R.re.ndim != 3 or q.shape[-1] != R.shape[0] or q.shape[-2] != R.shape[2]:
        raise DimensionError(f"mode kernel mismatch: selection {q.shape} vs kernel {R.shape}")
    lead = "abc"[: q.re.ndim - 2]
    return complex_einsum(f"{lead}mi,iom->{lead}mo", q, R)


def dft(x: Tensor) -> ComplexTensor:
    """Full forward transform along axis -2 (un-normalized)."""
    x = as_tensor(x)
    X = _fft.fft(x.data, axis=-2)
    N = x.shape[-2]

    # adjoint of x -> Re(F x) is g -> Re(conj(F)^T g) = N * Re(ifft(g)); likewise for Im
    def bw_re(g):
        return (N * _fft.ifft(g, axis=-2).real,)

    def bw_im(g):
        return (N * _fft.ifft(1j * g, axis=-2).real,)

    re = Tensor._make(X.real.copy(), (x,), bw_re)
    im = Tensor._make(X.imag.copy(), (x,), bw_im)
    return ComplexTensor(re, im)


def idft(X: ComplexTensor, check_real: float | None = 1e-8) -> Tensor:
    """Inverse transform along axis -2 returning the real part.

    The caller is responsible for a conjugate-symmetric spectrum; with
    ``check_real`` set, a larger imaginary residue raises.
    """
    z = _fft.ifft(X.numpy(), axis=-2)
    if check_real is not None:
        scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
        if np.max(np.abs(z.imag), initial=0.0) > check_real * scale:
            raise ValueError("idft: spectrum is not conjugate-symmetric, output would be complex")
    N = X.shape[-2]

    # y = Re(conj(F)^T (a + ib)) / N, so the adjoints are Re(F g) / N and Im(F g) / N
    def bw(g):
        G = _fft.fft(g, axis=-2) / N
        return G.real, G.imag

    return Tensor._make(z.real.copy(), (X.re, X.im), bw)


def irfft_modes(Y: ComplexTensor, modes: np.ndarray, n: int) -> Tensor:
    """Zero-pad a spectrum given at one-sided ``modes`` to length ``n`` and
    invert it to a real series along axis -2, completing conjugate symmetry."""
    modes = np.asarray(modes, dtype=np.int64)
    if Y.shape[-2] != len(modes):
        raise DimensionError(f"{len(modes)} modes but spectrum has {Y.shape[-2]} rows")
    if modes.min() < 0 or modes.max() > n // 2:
        raise ValueError(f"modes must lie in [0, {n // 2}] for length {n}")
    z = _fft.irfft_modes(Y.numpy(), modes, n, axis=-2)
    scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
    if np.max(np.abs(z.imag), initial=0.0) > 1e-10 * scale:
        raise ArithmeticError("irfft_modes: imaginary residue above 1e-10")
    weights = _fft.hermitian_weights(n, modes)[:, None]
    keeps_imag = (weights == 2.0).astype(np.float64)

    def bw(g):
        G = _fft.fft(g, axis=-2)[..., modes, :]
        return (weights / n) * G.real, keeps_imag * (weights / n) * G.imag

    return Tensor._make(z.real.copy(), (Y.re, Y.im), bw)
