"""Causal depthwise convolution engines.

Two interchangeable strategies compute y[b,d,t] = sum_tau k[d,tau] * u[b,d,t-tau]
(terms with negative index dropped):

* direct: per-lane summation in a fixed order, the reference semantics
* fft:    pad both operands to the next power of two past L + L_k - 1,
          multiply half spectra, inverse transform, truncate to L

Inputs are (B, D, L) activations and (D, L_k) kernels, one kernel per channel;
channel mixing never happens here. Kernels longer than the sequence are
rejected rather than truncated. All functions are pure and reentrant.
"""

from __future__ import annotations

import numpy as np

from . import spectral
from .errors import KernelTooLong, ShapeError
from .spectral import check_seq


def _check_pair(u: np.ndarray, k: np.ndarray, who: str):
    u = check_seq(u, who)
    k = np.ascontiguousarray(k, dtype=np.float64)
    if k.ndim != 2:
        raise ShapeError(f"{who}: kernel must be (D, L_k), got {k.shape}")
    if k.shape[0] != u.shape[1]:
        raise ShapeError(f"{who}: kernel channels {k.shape[0]} != input channels {u.shape[1]}")
    if k.shape[1] > u.shape[2]:
        raise KernelTooLong(f"{who}: kernel length {k.shape[1]} > sequence length {u.shape[2]}")
    return u, k


def causal_conv_direct(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    u, k = _check_pair(u, k, "causal_conv_direct")
    B, D, L = u.shape
    y = np.empty_like(u)
    for b in range(B):
        for d in range(D):
            y[b, d] = np.convolve(u[b, d], k[d])[:L]
    return y


def causal_conv_fft(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    u, k = _check_pair(u, k, "causal_conv_fft")
    L = u.shape[2]
    nfft = spectral.next_pow2(L + k.shape[1] - 1)
    U = spectral.rfft_batched(u, nfft)
    K = spectral.rfft_batched(k, nfft)
    return spectral.irfft_batched(U * K[None], nfft)[..., :L]


def dilated_conv_direct(u: np.ndarray, weights: np.ndarray, dilation: int) -> np.ndarray:
    """Termwise dilated sum: y[t] = sum_j w[j] * u[t - j*dilation].

    Equivalent to materializing the dilated kernel and running causal_conv_direct;
    kept separate as the cheap O(w L) path and as an independent oracle for it.
    """
    u = check_seq(u, "dilated_conv_direct")
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[0] != u.shape[1]:
        raise ShapeError(f"dilated_conv_direct: weights must be (D, w), got {weights.shape}")
    if dilation < 1:
        raise ShapeError(f"dilated_conv_direct: dilation must be >= 1, got {dilation}")
    L = u.shape[2]
    w = weights.shape[1]
    if (w - 1) * dilation + 1 > L:
        raise KernelTooLong(f"dilated span {(w - 1) * dilation + 1} > sequence length {L}")
    y = np.zeros_like(u)
    for j in range(w):
        off = j * dilation
        y[..., off:] += weights[:, j, None] * u[..., : L - off]
    return y


def bidirectional_conv(u: np.ndarray, k_fwd: np.ndarray, k_bwd: np.ndarray,
                       engine: "ConvEngine | None" = None) -> np.ndarray:
    """Two-sided pass: causal over u plus time-reversed causal over reversed u."""
    conv = engine.causal_conv if engine is not None else causal_conv_fft
    fwd = conv(u, k_fwd)
    bwd = conv(u[..., ::-1].copy(), k_bwd)[..., ::-1]
    return fwd + bwd


class ConvEngine:
    """Strategy holder; `auto` runs small kernels directly, long ones via FFT.

    Both strategies compute identical math to within round-off; the default
    crossover of 64 taps is a benchmarked laptop-scale value.
    """

    def __init__(self, strategy: str = "auto", fft_threshold: int = 64):
        if strategy not in ("auto", "direct", "fft"):
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.fft_threshold = fft_threshold

    def causal_conv(self, u: np.ndarray, k: np.ndarray) -> np.ndarray:
        if self.strategy == "direct":
            return causal_conv_direct(u, k)
        if self.strategy == "fft":
            return causal_conv_fft(u, k)
        if k.shape[1] < self.fft_threshold:
            return causal_conv_direct(u, k)
        return causal_conv_fft(u, k)


DEFAULT_ENGINE = ConvEngine()
