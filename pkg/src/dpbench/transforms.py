"""Orthonormal transforms used by the wavelet and Fourier mechanisms.

The Haar transform is the standard orthonormal pyramid (pads to a power of
two, inverse truncates).  The Fourier path works in the real orthonormal
harmonic basis (constant, cosine/sine pairs, Nyquist term) so that Parseval
holds exactly with real coefficients.
"""

from __future__ import annotations

import numpy as np


def next_power_of_two(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def haar_forward(values: np.ndarray) -> np.ndarray:
    """Orthonormal Haar coefficients, zero-padding to a power of two.

    Layout: [approximation, coarsest detail, ..., finest details]; the level
    of detail doubles with each block.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = next_power_of_two(v.size)
    if n != v.size:
        v = np.concatenate([v, np.zeros(n - v.size)])
    details = []
    a = v
    while a.size > 1:
        even, odd = a[0::2], a[1::2]
        details.append((even - odd) / np.sqrt(2.0))
        a = (even + odd) / np.sqrt(2.0)
    details.reverse()
    return np.concatenate([a] + details)


def haar_inverse(coeffs: np.ndarray, length: int | None = None) -> np.ndarray:
    """Exact inverse of :func:`haar_forward`; truncates padding if asked."""
    c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    n = c.size
    if n & (n - 1):
        raise ValueError("coefficient length must be a power of two")
    a = c[:1]
    pos = 1
    while pos < n:
        detail = c[pos : 2 * pos]
        out = np.empty(2 * pos)
        out[0::2] = (a + detail) / np.sqrt(2.0)
        out[1::2] = (a - detail) / np.sqrt(2.0)
        a = out
        pos *= 2
    if length is not None:
        a = a[:length]
    return a


def haar_spans(n: int) -> np.ndarray:
    """Cells covered by each coefficient of :func:`haar_forward` (length n)."""
    if n & (n - 1) or n < 1:
        raise ValueError("n must be a power of two")
    spans = np.empty(n, dtype=np.int64)
    spans[0] = n
    pos = 1
    while pos < n:
        spans[pos : 2 * pos] = n // pos
        pos *= 2
    return spans


def real_fourier_forward(values: np.ndarray) -> np.ndarray:
    """Coefficients in the real orthonormal Fourier basis (n real numbers).

    Layout: [mean term, cos_1, sin_1, cos_2, sin_2, ..., (Nyquist term)].
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.size
    spectrum = np.fft.rfft(v)
    coeffs = np.empty(n)
    coeffs[0] = spectrum[0].real / np.sqrt(n)
    half = (n - 1) // 2
    root = np.sqrt(2.0 / n)
    for j in range(1, half + 1):
        coeffs[2 * j - 1] = spectrum[j].real * root
        coeffs[2 * j] = -spectrum[j].imag * root
    if n % 2 == 0 and n > 1:
        coeffs[n - 1] = spectrum[n // 2].real / np.sqrt(n)
    return coeffs


def real_fourier_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`real_fourier_forward`."""
    c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    n = c.size
    spectrum = np.zeros(n // 2 + 1, dtype=np.complex128)
    spectrum[0] = c[0] * np.sqrt(n)
    half = (n - 1) // 2
    root = np.sqrt(2.0 / n)
    for j in range(1, half + 1):
        spectrum[j] = complex(c[2 * j - 1], -c[2 * j]) / root
    if n % 2 == 0 and n > 1:
        spectrum[n // 2] = c[n - 1] * np.sqrt(n)
    return np.fft.irfft(spectrum, n=n)


def topk_indices(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest-magnitude coefficients, ties to lower index."""
    c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if not 1 <= k <= c.size:
        raise ValueError(f"k must be in [1, {c.size}], got {k}")
    order = np.lexsort((np.arange(c.size), -np.abs(c)))
    return np.sort(order[:k])


def dft_topk(values: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Retain the k largest-magnitude real Fourier coefficients.

    Returns (kept indices, kept coefficient values); reconstruct with
    :func:`dft_reconstruct`.  With k = n the roundtrip is exact, and the
    dropped tail energy equals the squared reconstruction error (Parseval).
    """
    coeffs = real_fourier_forward(values)
    idx = topk_indices(coeffs, k)
    return idx, coeffs[idx]


def dft_reconstruct(indices: np.ndarray, coeffs: np.ndarray, n: int) -> np.ndarray:
    """Invert a truncated coefficient set back to the signal domain."""
    full = np.zeros(n)
    full[np.asarray(indices, dtype=np.int64)] = np.asarray(coeffs, dtype=np.float64)
    return real_fourier_inverse(full)
