"""Radix-2 fast Fourier transform, implemented in-repo.

Sign convention matches the usual forward transform
X_k = sum_j x_j exp(-2 pi i j k / n); sizes must be powers of two.
Correctness is pinned against a direct DFT in the test suite.
"""

import numpy as np

from . import kernels


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT size must be a power of two, got {n}")


def fft(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError("expected a 1-d array")
    _check_pow2(x.shape[0])
    if x.shape[0] == 1:
        return x.copy()
    return kernels.fft(x)


def ifft(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    return np.conj(fft(np.conj(x))) / x.shape[0]
