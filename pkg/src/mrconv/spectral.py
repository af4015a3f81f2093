"""Power-of-two Fourier transforms and padding helpers.

Conventions, fixed across the whole library:

* forward transforms are unnormalized: X[j] = sum_t x[t] exp(-2*pi*i*j*t/n)
* inverse transforms carry the 1/n factor: x[t] = (1/n) sum_j X[j] exp(+2*pi*i*j*t/n)
* transform lengths must be powers of two; arbitrary-length convolutions are
  handled upstream by padding to the next power of two.

All routines are pure functions over caller-owned buffers and are safe to call
concurrently. Sequence activations everywhere in the library are float64
arrays of shape (batch B, channels D, length L); `check_seq` enforces that.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidLength, InvalidSpectrum, ShapeError

# Absolute tolerance for the "DC/Nyquist bins must be real" contract of irfft.
_HERMITIAN_ATOL = 1e-12


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two >= n. n must be positive."""
    if n < 1:
        raise InvalidLength(f"next_pow2 requires n >= 1, got {n}")
    return 1 << (int(n) - 1).bit_length()


def _require_pow2(n: int, who: str) -> None:
    if not is_pow2(n):
        raise InvalidLength(f"{who} requires a power-of-two length, got {n}")


def fft(x) -> np.ndarray:
    """Unnormalized forward transform of a complex vector of power-of-two length."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1:
        raise ShapeError(f"fft expects a 1-D vector, got shape {x.shape}")
    _require_pow2(x.shape[0], "fft")
    return np.fft.fft(x)


def ifft(X) -> np.ndarray:
    """Inverse of `fft`; carries the 1/n normalization."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 1:
        raise ShapeError(f"ifft expects a 1-D vector, got shape {X.shape}")
    _require_pow2(X.shape[0], "ifft")
    return np.fft.ifft(X)


def rfft(x) -> np.ndarray:
    """First n/2+1 bins of fft(x) for a real vector x of power-of-two length n."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"rfft expects a 1-D vector, got shape {x.shape}")
    _require_pow2(x.shape[0], "rfft")
    return np.fft.rfft(x)


def irfft(X, n: int) -> np.ndarray:
    """Real inverse transform via Hermitian completion X[n-j] = conj(X[j]).

    The DC bin (and the Nyquist bin when n > 1) must have vanishing imaginary
    part; anything beyond 1e-12 is rejected rather than silently discarded.
    """
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 1:
        raise ShapeError(f"irfft expects a 1-D vector, got shape {X.shape}")
    _require_pow2(n, "irfft")
    if X.shape[0] != n // 2 + 1:
        raise ShapeError(f"irfft: expected {n // 2 + 1} bins for n={n}, got {X.shape[0]}")
    if abs(X[0].imag) > _HERMITIAN_ATOL:
        raise InvalidSpectrum(f"irfft: DC bin has imaginary part {X[0].imag!r}")
    if n > 1 and abs(X[n // 2].imag) > _HERMITIAN_ATOL:
        raise InvalidSpectrum(f"irfft: Nyquist bin has imaginary part {X[n // 2].imag!r}")
    return np.fft.irfft(X, n=n)


def rfft_batched(x: np.ndarray, n: int) -> np.ndarray:
    """rfft along the last axis, zero-padding each row to power-of-two length n."""
    _require_pow2(n, "rfft_batched")
    return np.fft.rfft(x, n=n, axis=-1)


def irfft_batched(X: np.ndarray, n: int) -> np.ndarray:
    _require_pow2(n, "irfft_batched")
    return np.fft.irfft(X, n=n, axis=-1)


def zero_pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    """Pad the last axis with `left` zeros in front and `right` zeros behind."""
    x = np.asarray(x)
    if left == 0 and right == 0:
        return x.copy()
    pad = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    return np.pad(x, pad, mode="constant")


def check_seq(x: np.ndarray, who: str = "input") -> np.ndarray:
    """Validate the (B, D, L) float64 activation layout used throughout."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"{who}: expected (B, D, L) array, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ShapeError(f"{who}: contains NaN/Inf")
    return x
