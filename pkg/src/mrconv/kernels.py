"""Kernel parameterizations for multi-resolution branches.

Each branch stores a fixed per-channel parameter budget regardless of how long
its materialized kernel is:

* dense:   one weight per tap (the full-rank baseline; budget grows with length)
* dilated: `w` taps spread at a fixed stride, zeros in between
* fourier: `m` low-frequency half-spectrum modes, inverse-transformed to time
* sparse:  `s` taps at random, frozen positions
* fourier+sparse: a fourier and a sparse kernel of equal length combined with
  learnable per-channel rescaling at every materialization

Materialization returns a differentiable (D, length) Var so the same code path
serves training and eval; `.np()` gives the plain array.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import ops, rng
from .autodiff import Parameter, Var
from .errors import InvalidResolution, InvalidSparsity, InvalidSpectrum, ShapeError

KINDS = ("dense", "dilated", "fourier", "sparse", "fourier+sparse")


def sample_sparse_positions(seed: int, s: int, length: int, index: int = 0) -> np.ndarray:
    """s distinct sorted positions in [0, length), reproducible from (seed, index)."""
    if s > length:
        raise InvalidSparsity(f"cannot place {s} taps in {length} positions")
    gen = rng.stream(seed, "sparse", index)
    return np.sort(gen.choice(length, size=s, replace=False)).astype(np.int64)


class DenseKernel:
    kind = "dense"

    def __init__(self, weights: np.ndarray, name: str = "dense"):
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if weights.shape[1] < 1:
            raise ShapeError("dense kernel needs at least one tap")
        self.weights = Parameter(weights, f"{name}.weights", group="kernel")
        self.declared_len = weights.shape[1]

    def materialize(self) -> Var:
        return self.weights

    def np(self) -> np.ndarray:
        return self.weights.data.copy()

    def parameters(self):
        return [self.weights]


class DilatedKernel:
    """w stored taps per channel at stride `dilation`; the rest of the kernel is zero.

    declared_len may exceed the natural span (w-1)*dilation + 1, in which case
    the materialized kernel is simply zero-extended on the right.
    """

    kind = "dilated"

    def __init__(self, weights: np.ndarray, dilation: int, declared_len: int | None = None,
                 name: str = "dilated"):
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        span = (weights.shape[1] - 1) * dilation + 1
        if declared_len is None:
            declared_len = span
        if declared_len < span:
            raise ShapeError(f"declared_len {declared_len} < dilated span {span}")
        self.weights = Parameter(weights, f"{name}.weights", group="kernel")
        self.dilation = int(dilation)
        self.declared_len = int(declared_len)

    @property
    def taps(self) -> np.ndarray:
        return np.arange(self.weights.data.shape[1], dtype=np.int64) * self.dilation

    def materialize(self) -> Var:
        return ad.scatter_last(self.weights, self.taps, self.declared_len)

    def np(self) -> np.ndarray:
        return self.materialize().data

    def parameters(self):
        return [self.weights]


class FourierKernel:
    """Band-limited kernel stored as m unnormalized half-spectrum modes.

    Hermitian symmetry is structural: only bins 0..m-1 exist and the imaginary
    parts of the DC (and Nyquist, if stored) bins are pinned to zero, so the
    time-domain kernel is real by construction.
    """

    kind = "fourier"

    def __init__(self, modes: np.ndarray, declared_len: int, name: str = "fourier"):
        modes = np.atleast_2d(np.asarray(modes, dtype=np.complex128))
        m = modes.shape[1]
        if m > declared_len // 2 + 1:
            raise InvalidSpectrum(f"{m} modes exceed band limit of length {declared_len}")
        re = modes.real.copy()
        im = modes.imag.copy()
        if np.abs(im[:, 0]).max(initial=0.0) > 1e-12:
            raise InvalidSpectrum("mode 0 must be real")
        im[:, 0] = 0.0
        if m - 1 == declared_len // 2 and declared_len > 1:
            if np.abs(im[:, -1]).max(initial=0.0) > 1e-12:
                raise InvalidSpectrum("Nyquist mode must be real")
            im[:, -1] = 0.0
        self.modes_re = Parameter(re, f"{name}.modes_re", group="kernel")
        self.modes_im = Parameter(im, f"{name}.modes_im", group="kernel")
        self.declared_len = int(declared_len)

    @property
    def modes(self) -> np.ndarray:
        return self.modes_re.data + 1j * self.modes_im.data

    def materialize(self, length: int | None = None) -> Var:
        return ops.fourier_time_kernel(self.modes_re, self.modes_im,
                                       self.declared_len if length is None else length)

    def np(self) -> np.ndarray:
        return self.materialize().data

    def parameters(self):
        return [self.modes_re, self.modes_im]


class SparseKernel:
    kind = "sparse"

    def __init__(self, positions: np.ndarray, values: np.ndarray, declared_len: int,
                 name: str = "sparse"):
        positions = np.atleast_2d(np.asarray(positions, dtype=np.int64))
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if positions.shape != values.shape:
            raise ShapeError(f"positions {positions.shape} vs values {values.shape}")
        if positions.size == 0:
            raise InvalidSparsity("sparse kernel needs at least one tap")
        if (np.diff(positions, axis=1) <= 0).any():
            raise ShapeError("positions must be strictly increasing per channel")
        if positions.min() < 0 or positions.max() >= declared_len:
            raise ShapeError(f"positions out of range [0, {declared_len})")
        # positions are frozen; only the values train
        self.positions = positions
        self.values = Parameter(values, f"{name}.values", group="kernel")
        self.declared_len = int(declared_len)

    def materialize(self) -> Var:
        return ad.scatter_last(self.values, self.positions, self.declared_len)

    def np(self) -> np.ndarray:
        return self.materialize().data

    def parameters(self):
        return [self.values]


class RescaledPairKernel:
    """Two equal-length kernels combined as beta0*k0 + beta1*k1 per channel.

    Linear rescaling keeps the pair mergeable at any time, so the combination
    is folded at every materialization rather than kept as separate branches.
    """

    kind = "fourier+sparse"

    def __init__(self, first, second, name: str = "pair"):
        if first.declared_len != second.declared_len:
            raise ShapeError("rescaled pair requires kernels of equal length")
        D = first.parameters()[0].data.shape[0]
        self.first = first
        self.second = second
        self.beta0 = Parameter(np.ones(D), f"{name}.beta0", group="kernel")
        self.beta1 = Parameter(np.ones(D), f"{name}.beta1", group="kernel")
        self.declared_len = first.declared_len

    def materialize(self) -> Var:
        return combine_linear_rescale(self.first.materialize(), self.second.materialize(),
                                      self.beta0, self.beta1)

    def np(self) -> np.ndarray:
        return self.materialize().data

    def parameters(self):
        return self.first.parameters() + self.second.parameters() + [self.beta0, self.beta1]


def combine_linear_rescale(k0, k1, beta0, beta1) -> Var:
    """beta0*k0 + beta1*k1 with per-channel scalars; kernels must match shapes."""
    k0, k1 = ad.lift(k0), ad.lift(k1)
    if k0.data.shape != k1.data.shape:
        raise ShapeError(f"kernel shapes differ: {k0.data.shape} vs {k1.data.shape}")
    b0 = ad.reshape(ad.lift(beta0), (-1, 1))
    b1 = ad.reshape(ad.lift(beta1), (-1, 1))
    return ad.add(ad.mul(b0, k0), ad.mul(b1, k1))


def fourier_mode_count(base_size: int, declared_len: int) -> int:
    """Stored modes per channel: the budget, capped by the band limit."""
    return min(base_size, declared_len // 2 + 1)


def _draw_modes(gen, D: int, base_size: int, length: int, std: float) -> np.ndarray:
    m = fourier_mode_count(base_size, length)
    modes = gen.normal(0.0, std, size=(D, m)) + 1j * gen.normal(0.0, std, size=(D, m))
    modes[:, 0] = modes[:, 0].real
    if m - 1 == length // 2 and length > 1:
        modes[:, -1] = modes[:, -1].real
    return modes


def init_kernel(kind: str, D: int, branch_index: int, base_size: int, seed: int,
                max_len: int | None = None, name: str = "kernel"):
    """Build the branch-`i` kernel of a multi-resolution stack.

    Branch i declares length base_size * 2**i. Dilated kernels stride their
    base_size taps by 2**i; sparse kernels scatter base_size taps at frozen
    random positions; fourier kernels store base_size modes (band-limit capped
    on the shortest branch). Weights are N(0, 1/base_size) so branch output
    variance stays roughly independent of the branch length.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if base_size < 1:
        raise InvalidResolution(f"base kernel size must be >= 1, got {base_size}")
    length = base_size * (1 << branch_index)
    if max_len is not None and length > max_len:
        raise InvalidResolution(f"branch {branch_index} length {length} exceeds max {max_len}")
    std = 1.0 / np.sqrt(base_size)
    gen = rng.stream(seed, "init", branch_index)

    if kind == "dense":
        return DenseKernel(gen.normal(0.0, std, size=(D, length)), name=name)
    if kind == "dilated":
        return DilatedKernel(gen.normal(0.0, std, size=(D, base_size)),
                             dilation=1 << branch_index, declared_len=length, name=name)
    if kind == "fourier":
        return FourierKernel(_draw_modes(gen, D, base_size, length, std),
                             declared_len=length, name=name)
    if kind == "sparse":
        positions = np.stack([
            sample_sparse_positions(seed, base_size, length, index=branch_index * 100003 + d)
            for d in range(D)
        ])
        return SparseKernel(positions, gen.normal(0.0, std, size=(D, base_size)),
                            declared_len=length, name=name)
    # fourier+sparse
    four = FourierKernel(_draw_modes(gen, D, base_size, length, std),
                         declared_len=length, name=f"{name}.fourier")
    positions = np.stack([
        sample_sparse_positions(seed, base_size, length, index=branch_index * 100003 + d)
        for d in range(D)
    ])
    spar = SparseKernel(positions, gen.normal(0.0, std, size=(D, base_size)),
                        declared_len=length, name=f"{name}.sparse")
    return RescaledPairKernel(four, spar, name=name)


def write_kernel_csv(branch_kernels, fh) -> None:
    """Dump materialized kernels as `branch,channel,t,value` rows."""
    fh.write("branch,channel,t,value\n")
    for i, kern in enumerate(branch_kernels):
        arr = kern.np()
        for d in range(arr.shape[0]):
            for t in range(arr.shape[1]):
                fh.write(f"{i},{d},{t},{arr[d, t]!r}\n")
