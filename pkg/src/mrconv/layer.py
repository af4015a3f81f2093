"""Multi-resolution convolution layer with exact branch merging.

Training runs N parallel branches; branch i convolves the input with a kernel
of length base_len * 2**i, normalizes with its own BatchNorm, and the layer
output is the per-channel weighted sum of branch outputs. With BatchNorms in
eval mode the whole stack is linear in the input, so the branches fold into a
single kernel plus bias: scale each folded branch kernel by its mix weight,
right-pad to the longest length, and sum. The folded form computes the same
function through one convolution.

The `concat` merge style places folded branch kernels in consecutive segments
(shortest first) scaled by a fixed per-octave decay instead of learned
weights; mix weights are unused there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import ops
from .autodiff import Parameter, Var, lift
from .conv import DEFAULT_ENGINE, ConvEngine, causal_conv_direct
from .errors import DegenerateBatch, InvalidMode, InvalidResolution, ShapeError, StaleMerge
from .kernels import init_kernel
from .spectral import check_seq, zero_pad

MODES = ("train", "eval_branched", "eval_merged")


def num_resolutions(L: int, base_len: int) -> int:
    """Branch count: log2(L / base_len) + 1, floored when L is not an exact multiple."""
    if base_len < 1 or L < base_len:
        raise InvalidResolution(f"need 1 <= base_len <= L, got base_len={base_len}, L={L}")
    return int(np.floor(np.log2(L // base_len))) + 1


def branch_lengths(L: int, base_len: int) -> list[int]:
    """Declared kernel length per branch; the longest is truncated to L."""
    return [min(base_len << i, L) for i in range(num_resolutions(L, base_len))]


class BatchNorm:
    """Per-channel normalization over the (batch, time) axes of (B, D, L) input."""

    def __init__(self, D: int, eps: float = 1e-5, momentum: float = 0.1, name: str = "bn"):
        self.gamma = Parameter(np.ones(D), f"{name}.gamma")
        self.beta = Parameter(np.zeros(D), f"{name}.beta")
        self.running_mean = np.zeros(D)
        self.running_var = np.ones(D)
        self.eps = eps
        self.momentum = momentum
        self.training = True
        self.stat_version = 0
        self.name = name

    def forward(self, x) -> Var:
        x = lift(x)
        B, D, L = x.data.shape
        g = ad.reshape(self.gamma, (1, D, 1))
        b = ad.reshape(self.beta, (1, D, 1))
        if self.training:
            n = B * L
            if n <= 1:
                raise DegenerateBatch("train-mode batch statistics need more than one element")
            mu = ad.mean(x, (0, 2), keepdims=True)
            xc = ad.sub(x, mu)
            var = ad.mean(ad.mul(xc, xc), (0, 2), keepdims=True)
            xn = ad.div(xc, ad.sqrt(ad.add(var, self.eps)))
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data.reshape(D)
            self.running_var = (1 - m) * self.running_var + m * var.data.reshape(D) * n / (n - 1)
            self.stat_version += 1
        else:
            mu = Var(self.running_mean.reshape(1, D, 1))
            sig = Var(np.sqrt(self.running_var + self.eps).reshape(1, D, 1))
            xn = ad.div(ad.sub(x, mu), sig)
        return ad.add(ad.mul(xn, g), b)

    def parameters(self):
        return [self.gamma, self.beta]

    def version(self) -> int:
        return self.gamma.version + self.beta.version + self.stat_version


def bn_fold(kernel: np.ndarray, bn: BatchNorm) -> tuple[np.ndarray, np.ndarray]:
    """Absorb an eval-mode BatchNorm into the preceding kernel.

    With sigma = sqrt(running_var + eps):
        folded kernel = (gamma / sigma) * kernel   (per channel)
        folded bias   = beta - running_mean * gamma / sigma
    so conv(u, folded) + bias == BN_eval(conv(u, kernel)) exactly.
    """
    if bn.training:
        raise InvalidMode("bn_fold requires eval-mode statistics")
    kernel = np.asarray(kernel, dtype=np.float64)
    sigma = np.sqrt(bn.running_var + bn.eps)
    scale = bn.gamma.data / sigma
    return kernel * scale[:, None], bn.beta.data - bn.running_mean * scale


@dataclass
class MergedConv:
    """Inference artifact: one kernel (and bias) equivalent to the whole branch stack."""

    kernel: np.ndarray
    bias: np.ndarray
    kernel_bwd: np.ndarray | None = None
    version: int = field(default=-1)


class MultiResConv:
    """N-branch depthwise layer over (B, D, L) sequences.

    mode is one of "train" (batch statistics, running-stat updates),
    "eval_branched" (running statistics, still one conv per branch) and
    "eval_merged" (single folded conv, lazily rebuilt when parameters moved).
    """

    def __init__(self, D: int, base_len: int, max_len: int, kind: str = "fourier",
                 seed: int = 0, merge_style: str = "sum", fixed_decay: float = 0.5,
                 bidirectional: bool = False, engine: ConvEngine | None = None,
                 name: str = "mrconv"):
        if merge_style not in ("sum", "concat"):
            raise ValueError(f"unknown merge style {merge_style!r}")
        self.D = D
        self.base_len = base_len
        self.max_len = max_len
        self.kind = kind
        self.merge_style = merge_style
        self.fixed_decay = fixed_decay
        self.bidirectional = bidirectional
        self.engine = engine if engine is not None else DEFAULT_ENGINE
        self.name = name

        if merge_style == "concat":
            # segments stack end to end: base_len*(2**N - 1) taps must fit in max_len
            n = 1
            while base_len * ((1 << (n + 1)) - 1) <= max_len:
                n += 1
            self.n_branches = n
        else:
            self.n_branches = num_resolutions(max_len, base_len)
        self.lengths = [base_len << i for i in range(self.n_branches)]
        if merge_style == "sum":
            self.lengths = branch_lengths(max_len, base_len)

        self.kernels = []
        self.kernels_bwd = []
        self.bns = []
        for i in range(self.n_branches):
            self.kernels.append(init_kernel(kind, D, i, base_len, seed,
                                            max_len=max_len, name=f"{name}.branch{i}.fwd"))
            if bidirectional:
                self.kernels_bwd.append(init_kernel(kind, D, i, base_len, seed + 1,
                                                    max_len=max_len, name=f"{name}.branch{i}.bwd"))
            self.bns.append(BatchNorm(D, name=f"{name}.bn{i}"))

        self.mix = Parameter(np.full((self.n_branches, D), 1.0 / self.n_branches),
                             f"{name}.mix")
        self.mode = "train"
        self.merged: MergedConv | None = None

    # -- bookkeeping ---------------------------------------------------------

    def set_mode(self, mode: str) -> None:
        if mode not in MODES:
            raise InvalidMode(f"unknown mode {mode!r}")
        self.mode = mode
        for bn in self.bns:
            bn.training = mode == "train"

    def parameters(self) -> list[Parameter]:
        params = []
        for kern in self.kernels + self.kernels_bwd:
            params.extend(kern.parameters())
        for bn in self.bns:
            params.extend(bn.parameters())
        params.append(self.mix)
        return params

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for bn in self.bns:
            out.append((f"{bn.name}.running_mean", bn.running_mean))
            out.append((f"{bn.name}.running_var", bn.running_var))
        for kern in self.kernels + self.kernels_bwd:
            for sub in (getattr(kern, "first", None), getattr(kern, "second", None), kern):
                if sub is not None and hasattr(sub, "positions"):
                    out.append((f"{sub.values.name}.positions", sub.positions))
        return out

    def version(self) -> int:
        v = sum(p.version for p in self.parameters())
        return v + sum(bn.stat_version for bn in self.bns)

    # -- forward paths -------------------------------------------------------

    def forward(self, u) -> Var:
        if self.mode == "eval_merged":
            return self.forward_merged(u)
        return self.forward_branched(u)

    def _branch_conv(self, u: Var, i: int) -> Var:
        k = self.kernels[i].materialize()
        if self.merge_style == "concat":
            k = self._placed_segment(k, i)
        c = ops.causal_conv(u, k, self.engine)
        if self.bidirectional:
            kb = self.kernels_bwd[i].materialize()
            if self.merge_style == "concat":
                kb = self._placed_segment(kb, i)
            ur = ad.reverse_time(u)
            c = ad.add(c, ad.reverse_time(ops.causal_conv(ur, kb, self.engine)))
        return c

    def _placed_segment(self, k: Var, i: int) -> Var:
        off = self.base_len * ((1 << i) - 1)
        total = self.base_len * ((1 << self.n_branches) - 1)
        scaled = ad.scale(k, float(self.fixed_decay) ** i)
        return ad.pad_last(scaled, off, total - off - self.lengths[i])

    def forward_branched(self, u) -> Var:
        if self.mode == "eval_merged":
            raise InvalidMode("layer is in eval_merged mode")
        u = lift(u)
        check_seq(u.data, self.name)
        out = None
        for i in range(self.n_branches):
            ct = self.bns[i].forward(self._branch_conv(u, i))
            if self.merge_style == "sum":
                w = ad.reshape(ad.slice_axis(self.mix, 0, i, i + 1), (1, self.D, 1))
                ct = ad.mul(ct, w)
            out = ct if out is None else ad.add(out, ct)
        return out

    # -- merging -------------------------------------------------------------

    def reparameterize(self) -> MergedConv:
        """Fold every branch into a single kernel and bias; BNs must be in eval mode."""
        if any(bn.training for bn in self.bns):
            raise InvalidMode("reparameterize requires eval-mode BatchNorm")
        if self.merge_style == "concat":
            merged = self._merge_concat()
        else:
            merged = self._merge_sum()
        merged.version = self.version()
        self.merged = merged
        return merged

    def _merge_sum(self) -> MergedConv:
        L_rep = max(self.lengths)
        kernel = np.zeros((self.D, L_rep))
        kernel_bwd = np.zeros((self.D, L_rep)) if self.bidirectional else None
        bias = np.zeros(self.D)
        for i in range(self.n_branches):
            kbar, bbar = bn_fold(self.kernels[i].np(), self.bns[i])
            a = self.mix.data[i]
            kernel += a[:, None] * zero_pad(kbar, 0, L_rep - self.lengths[i])
            bias += a * bbar
            if self.bidirectional:
                scale = self.bns[i].gamma.data / np.sqrt(self.bns[i].running_var + self.bns[i].eps)
                kb = self.kernels_bwd[i].np() * scale[:, None]
                kernel_bwd += a[:, None] * zero_pad(kb, 0, L_rep - self.lengths[i])
        return MergedConv(kernel, bias, kernel_bwd)

    def _merge_concat(self) -> MergedConv:
        total = self.base_len * ((1 << self.n_branches) - 1)
        kernel = np.zeros((self.D, total))
        kernel_bwd = np.zeros((self.D, total)) if self.bidirectional else None
        bias = np.zeros(self.D)
        for i in range(self.n_branches):
            off = self.base_len * ((1 << i) - 1)
            decay = float(self.fixed_decay) ** i
            kbar, bbar = bn_fold(self.kernels[i].np(), self.bns[i])
            kernel[:, off:off + self.lengths[i]] += decay * kbar
            bias += bbar
            if self.bidirectional:
                scale = self.bns[i].gamma.data / np.sqrt(self.bns[i].running_var + self.bns[i].eps)
                kb = self.kernels_bwd[i].np() * scale[:, None]
                kernel_bwd[:, off:off + self.lengths[i]] += decay * kb
        return MergedConv(kernel, bias, kernel_bwd)

    def reparameterize_concat(self) -> MergedConv:
        if self.merge_style != "concat":
            raise InvalidMode("layer was not built with merge_style='concat'")
        return self.reparameterize()

    def forward_merged(self, u, rebuild: bool = True) -> Var:
        """Single-conv path. Rebuilds the fold lazily unless rebuild=False, in
        which case running with out-of-date parameters raises StaleMerge."""
        if self.merged is None or self.merged.version != self.version():
            if not rebuild:
                raise StaleMerge("merged kernel does not match current parameters")
            if any(bn.training for bn in self.bns):
                raise InvalidMode("merged forward requires eval-mode BatchNorm")
            self.reparameterize()
        u = lift(u)
        check_seq(u.data, self.name)
        m = self.merged
        y = ops.causal_conv(u, Var(m.kernel), self.engine)
        if self.bidirectional:
            ur = ad.reverse_time(u)
            y = ad.add(y, ad.reverse_time(ops.causal_conv(ur, Var(m.kernel_bwd), self.engine)))
        return ad.add(y, Var(m.bias.reshape(1, -1, 1)))


def multi_head_expand(u, heads: int):
    """Replicate channels for multi-head processing: (B, D, L) -> (B, heads*D, L)."""
    if heads < 1:
        raise ShapeError(f"heads must be >= 1, got {heads}")
    if isinstance(u, Var):
        return ops.tile_channels(u, heads)
    return np.tile(np.asarray(u), (1, heads, 1))


def grouped_conv(u: np.ndarray, groups: int, kernels: np.ndarray,
                 engine: ConvEngine | None = None) -> np.ndarray:
    """Share a bank of D/groups kernels across channel groups; channel d uses
    kernel d mod (D/groups)."""
    u = check_seq(u, "grouped_conv")
    D = u.shape[1]
    if D % groups:
        raise ShapeError(f"groups {groups} must divide channels {D}")
    M = D // groups
    kernels = np.atleast_2d(np.asarray(kernels, dtype=np.float64))
    if kernels.shape[0] != M:
        raise ShapeError(f"expected {M} kernels for {groups} groups of {D} channels, "
                         f"got {kernels.shape[0]}")
    expanded = kernels[np.arange(D) % M]
    conv = (engine or DEFAULT_ENGINE).causal_conv
    return conv(u, expanded)
