"""Discrete Fourier transforms on plain numpy arrays.

Radix-2 Cooley-Tukey for power-of-two lengths, direct O(N^2) summation for
everything else. Forward is un-normalized, inverse carries the 1/N factor.
All transforms act along one axis and broadcast over the rest.
"""

from functools import lru_cache

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _dft_matrix(n: int, sign: int) -> np.ndarray:
    k = np.arange(n)
    # reduce k*j mod n before scaling so large n keeps full phase accuracy
    phase = (np.outer(k, k) % n) * (2.0 * np.pi / n)
    return np.exp(sign * 1j * phase)


@lru_cache(maxsize=64)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(n: int, sign: int) -> tuple:
    out = []
    size = 2
    while size <= n:
        half = size // 2
        out.append(np.exp(sign * 2j * np.pi * np.arange(half) / size))
        size *= 2
    return tuple(out)


def _radix2(x: np.ndarray, sign: int) -> np.ndarray:
    # x: complex, transform along axis 0
    n = x.shape[0]
    a = x[_bit_reverse(n)].copy()
    rest = a.shape[1:]
    size = 2
    for w in _twiddles(n, sign):
        half = size // 2
        blocks = a.reshape((n // size, size) + rest)
        even = blocks[:, :half]
        odd = blocks[:, half:] * w.reshape((1, half) + (1,) * len(rest))
        blocks = np.concatenate([even + odd, even - odd], axis=1)
        a = blocks.reshape((n,) + rest)
        size *= 2
    return a


def _transform(x: np.ndarray, axis: int, sign: int) -> np.ndarray:
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, 0)
    n = x.shape[0]
    if n == 0:
        return np.moveaxis(x.copy(), 0, axis)
    if is_power_of_two(n):
        y = _radix2(x, sign)
    else:
        mat = _dft_matrix(n, sign)
        y = np.tensordot(mat, x, axes=(1, 0))
    return np.moveaxis(y, 0, axis)


def fft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Un-normalized forward transform: X_k = sum_n x_n exp(-2 pi i k n / N)."""
    return _transform(x, axis, -1)


def ifft(X: np.ndarray, axis: int = 0) -> np.ndarray:
    """Inverse transform with 1/N normalization, so ifft(fft(x)) == x."""
    n = np.shape(X)[axis]
    return _transform(X, axis, +1) / n


def direct_dft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Plain O(N^2) summation, independent of the fast path. Used as a reference."""
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, 0)
    n = x.shape[0]
    out = np.zeros_like(x)
    for k in range(n):
        for j in range(n):
            out[k] += x[j] * np.exp(-2j * np.pi * ((k * j) % n) / n)
    return np.moveaxis(out, 0, axis)


def hermitian_weights(n: int, modes: np.ndarray) -> np.ndarray:
    """Multiplicity of each one-sided mode in a real inverse transform.

    Bin 0 and (for even n) the Nyquist bin appear once; every other bin k
    stands for itself and its mirror n-k.
    """
    modes = np.asarray(modes)
    w = np.full(modes.shape, 2.0)
    w[modes == 0] = 1.0
    if n % 2 == 0:
        w[modes == n // 2] = 1.0
    return w


def irfft_modes(y: np.ndarray, modes: np.ndarray, n: int, axis: int = 0) -> np.ndarray:
    """Real inverse transform of a spectrum known only at ``modes``.

    ``y`` holds complex values at one-sided bins ``modes`` (each in
    [0, n//2]); every other bin is zero. The full spectrum is completed
    conjugate-symmetrically, so the result is real. Imaginary parts at bin 0
    and the Nyquist bin cannot survive a real signal and are discarded.
    """
    modes = np.asarray(modes, dtype=np.int64)
    y = np.moveaxis(np.asarray(y, dtype=np.complex128), axis, 0)
    full = np.zeros((n,) + y.shape[1:], dtype=np.complex128)
    self_conj = (modes == 0) | ((n % 2 == 0) & (modes == n // 2))
    vals = y.copy()
    vals[self_conj] = vals[self_conj].real
    full[modes] = vals
    mirror = modes[~self_conj]
    full[(n - mirror) % n] = np.conj(vals[~self_conj])
    out = ifft(full, axis=0)
    return np.moveaxis(out, 0, axis)
