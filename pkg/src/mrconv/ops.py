"""Differentiable ops that pair domain math with analytic adjoints.

The convolution adjoints follow the correlation identities

    grad_k[d,tau] = sum_{b,t} g[b,d,t] * u[b,d,t-tau]   (truncated to L_k)
    grad_u[b,d,s] = sum_{tau}  k[d,tau] * g[b,d,s+tau]

both evaluated as FFT cross-correlations (conjugate spectrum products) at the
same padded length as the forward pass.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import spectral
from .autodiff import Var, lift, make
from .conv import DEFAULT_ENGINE, ConvEngine, _check_pair
from .errors import InvalidSpectrum, ShapeError

_SQRT2 = np.sqrt(2.0)


def causal_conv(u, k, engine: ConvEngine | None = None) -> Var:
    """Depthwise causal convolution of (B, D, L) input with (D, L_k) kernel."""
    u, k = lift(u), lift(k)
    eng = engine if engine is not None else DEFAULT_ENGINE
    ud, kd = _check_pair(u.data, k.data, "causal_conv")
    out_data = eng.causal_conv(ud, kd)
    B, D, L = ud.shape
    L_k = kd.shape[1]
    nfft = spectral.next_pow2(L + max(L, L_k) - 1)

    def vjp(g):
        G = spectral.rfft_batched(g, nfft)
        if k.requires:
            U = spectral.rfft_batched(ud, nfft)
            corr = spectral.irfft_batched(np.conj(U) * G, nfft)[..., :L_k]
            k.accumulate(corr.sum(axis=0))
        if u.requires:
            K = spectral.rfft_batched(kd, nfft)
            u.accumulate(spectral.irfft_batched(np.conj(K)[None] * G, nfft)[..., :L])

    return make(out_data, (u, k), vjp)


def fourier_time_kernel(modes_re, modes_im, length: int) -> Var:
    """Materialize m low-frequency half-spectrum modes to a (D, length) kernel.

    The stored modes are the unnormalized spectrum; the inverse transform
    carries the 1/length factor. Mode 0 (and the Nyquist bin, when stored)
    must be purely real; the imaginary parameters there are structurally zero.
    """
    modes_re, modes_im = lift(modes_re), lift(modes_im)
    re, im = modes_re.data, modes_im.data
    if re.shape != im.shape:
        raise ShapeError(f"mode arrays disagree: {re.shape} vs {im.shape}")
    D, m = re.shape
    bins = length // 2 + 1
    if m > bins:
        raise InvalidSpectrum(f"{m} modes exceed the {bins}-bin band limit of length {length}")
    # the DC (and Nyquist) imaginary parts are structurally zero: project them
    # out here so the kernel is real for any parameter values
    has_nyquist = (m - 1 == length // 2) and length > 1
    im_eff = im.copy()
    im_eff[:, 0] = 0.0
    if has_nyquist:
        im_eff[:, -1] = 0.0
    spec = np.zeros((D, bins), dtype=np.complex128)
    spec[:, :m] = re + 1j * im_eff
    out_data = spectral.irfft_batched(spec, length)

    def vjp(g):
        G = spectral.rfft_batched(g, length)[:, :m]
        w = np.full(m, 2.0 / length)
        w[0] = 1.0 / length
        if has_nyquist:
            w[-1] = 1.0 / length
        if modes_re.requires:
            modes_re.accumulate(G.real * w)
        if modes_im.requires:
            gi = G.imag * w
            gi[:, 0] = 0.0
            if has_nyquist:
                gi[:, -1] = 0.0
            modes_im.accumulate(gi)

    return make(out_data, (modes_re, modes_im), vjp)


def gelu(x) -> Var:
    """Exact Gaussian-error-linear unit, x * Phi(x)."""
    x = lift(x)
    phi = ad.erf(ad.scale(x, 1.0 / _SQRT2))
    return ad.mul(x, ad.scale(ad.add(phi, 1.0), 0.5))


def glu(x) -> Var:
    """Gated linear unit over channels: first half gated by sigmoid of second."""
    x = lift(x)
    D2 = x.data.shape[1]
    if D2 % 2:
        raise ShapeError(f"glu needs an even channel count, got {D2}")
    a = ad.slice_axis(x, 1, 0, D2 // 2)
    b = ad.slice_axis(x, 1, D2 // 2, D2)
    return ad.mul(a, ad.sigmoid(b))


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Var:
    """Normalize each (b, t) slice across channels, then affine per channel."""
    mu = ad.mean(x, axis=1, keepdims=True)
    xc = ad.sub(x, mu)
    var = ad.mean(ad.mul(xc, xc), axis=1, keepdims=True)
    xn = ad.div(xc, ad.sqrt(ad.add(var, eps)))
    g = ad.reshape(gamma, (1, -1, 1))
    b = ad.reshape(beta, (1, -1, 1))
    return ad.add(ad.mul(xn, g), b)


def dropout(x, p: float, rng: np.random.Generator | None, training: bool) -> Var:
    """Inverted dropout; identity when eval or p == 0."""
    x = lift(x)
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a generator")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return ad.mul(x, Var(mask))


def mean_pool(x) -> Var:
    """(B, D, L) -> (B, D) average over time."""
    return ad.mean(x, axis=2)


def last_pool(x) -> Var:
    x = lift(x)
    L = x.data.shape[2]
    return ad.reshape(ad.slice_axis(x, 2, L - 1, L), x.data.shape[:2])


def cross_entropy(logits, labels: np.ndarray) -> Var:
    """Mean negative log-likelihood; class axis is 1, extra axes are positions.

    logits: (B, C) or (B, C, P); labels: int array (B,) or (B, P).
    """
    logits = lift(logits)
    z = logits.data
    labels = np.asarray(labels, dtype=np.intp)
    if z.ndim == 2:
        z = z[:, :, None]
        labels = labels[:, None]
    if labels.shape != (z.shape[0], z.shape[2]):
        raise ShapeError(f"labels {labels.shape} do not match logits {logits.data.shape}")
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=1, keepdims=True)
    logp = (z - zmax) - np.log(sez)
    b_idx = np.arange(z.shape[0])[:, None]
    p_idx = np.arange(z.shape[2])[None, :]
    count = labels.size
    loss = -logp[b_idx, labels, p_idx].sum() / count

    def vjp(g):
        if logits.requires:
            soft = ez / sez
            soft[b_idx, labels, p_idx] -= 1.0
            grad = g * soft / count
            logits.accumulate(grad.reshape(logits.data.shape))

    return make(loss, (logits,), vjp)


def mse(pred, target: np.ndarray) -> Var:
    pred = lift(pred)
    diff = ad.sub(pred, Var(np.asarray(target, dtype=np.float64)))
    return ad.mean(ad.mul(diff, diff), axis=tuple(range(pred.data.ndim)))


def softmax_np(z: np.ndarray, axis: int = 1) -> np.ndarray:
    ez = np.exp(z - z.max(axis=axis, keepdims=True))
    return ez / ez.sum(axis=axis, keepdims=True)


def tile_channels(x, copies: int) -> Var:
    """Replicate channels `copies` times: (B, D, L) -> (B, copies*D, L)."""
    x = lift(x)
    B, D, L = x.data.shape

    def vjp(g):
        if x.requires:
            x.accumulate(g.reshape(B, copies, D, L).sum(axis=1))

    return make(np.tile(x.data, (1, copies, 1)), (x,), vjp)
