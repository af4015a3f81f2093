"""Sequence classification stack built around multi-resolution conv blocks.

Block layout (pre-norm variant):

    y = u + dropout(GLU(pointwise(GELU(conv_layer(norm(u))))))

where conv_layer is a MultiResConv, the pointwise linear widens D -> 2D and the
gated linear unit halves it back. Post-norm applies the normalization after the
residual add instead. The model wraps an encoder (pointwise in_dim -> D), a
stack of blocks, pooling (mean, last, or none for per-step outputs) and a
linear head.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import ops, rng
from .autodiff import Parameter, Var, lift
from .conv import ConvEngine
from .errors import InvalidMode
from .layer import BatchNorm, MultiResConv


class Block:
    def __init__(self, D: int, base_len: int, max_len: int, kind: str, seed: int,
                 norm: str = "layernorm", prenorm: bool = True, dropout: float = 0.0,
                 merge_style: str = "sum", fixed_decay: float = 0.5,
                 bidirectional: bool = False, residual: bool = True,
                 engine: ConvEngine | None = None, name: str = "block"):
        if norm not in ("layernorm", "batchnorm"):
            raise ValueError(f"unknown norm {norm!r}")
        self.layer = MultiResConv(D, base_len, max_len, kind=kind, seed=seed,
                                  merge_style=merge_style, fixed_decay=fixed_decay,
                                  bidirectional=bidirectional, engine=engine,
                                  name=f"{name}.conv")
        gen = rng.stream(seed, "init", 1_000_003)
        self.pw_W = Parameter(gen.normal(0, 1 / np.sqrt(D), size=(2 * D, D)), f"{name}.pw.W")
        self.pw_b = Parameter(np.zeros(2 * D), f"{name}.pw.b")
        self.norm_kind = norm
        self.prenorm = prenorm
        self.dropout_p = dropout
        self.residual = residual
        self.name = name
        if norm == "layernorm":
            self.ln_gamma = Parameter(np.ones(D), f"{name}.ln.gamma")
            self.ln_beta = Parameter(np.zeros(D), f"{name}.ln.beta")
            self.bn = None
        else:
            self.bn = BatchNorm(D, name=f"{name}.norm")

    def _norm(self, x: Var) -> Var:
        if self.norm_kind == "layernorm":
            return ops.layer_norm(x, self.ln_gamma, self.ln_beta)
        return self.bn.forward(x)

    def forward(self, u, training: bool = False, drop_rng=None) -> Var:
        u = lift(u)
        h = self._norm(u) if self.prenorm else u
        h = self.layer.forward(h)
        h = ops.gelu(h)
        h = ad.channel_linear(h, self.pw_W, self.pw_b)
        h = ops.glu(h)
        h = ops.dropout(h, self.dropout_p, drop_rng, training)
        out = ad.add(u, h) if self.residual else h
        if not self.prenorm:
            out = self._norm(out)
        return out

    def set_mode(self, mode: str) -> None:
        self.layer.set_mode(mode)
        if self.bn is not None:
            self.bn.training = mode == "train"

    def parameters(self):
        params = self.layer.parameters() + [self.pw_W, self.pw_b]
        if self.norm_kind == "layernorm":
            params += [self.ln_gamma, self.ln_beta]
        else:
            params += self.bn.parameters()
        return params

    def buffers(self):
        out = self.layer.buffers()
        if self.bn is not None:
            out += [(f"{self.bn.name}.running_mean", self.bn.running_mean),
                    (f"{self.bn.name}.running_var", self.bn.running_var)]
        return out


class Model:
    """Encoder -> blocks -> pool -> head. pool="none" emits per-step logits."""

    def __init__(self, in_dim: int, D: int, depth: int, n_classes: int, base_len: int,
                 max_len: int, kind: str = "fourier", seed: int = 0, pool: str = "mean",
                 norm: str = "layernorm", prenorm: bool = True, dropout: float = 0.0,
                 merge_style: str = "sum", fixed_decay: float = 0.5,
                 bidirectional: bool = False, engine: ConvEngine | None = None):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if pool not in ("mean", "last", "none"):
            raise ValueError(f"unknown pool {pool!r}")
        gen = rng.stream(seed, "init", 2_000_003)
        self.encoder_W = Parameter(gen.normal(0, 1 / np.sqrt(in_dim), size=(D, in_dim)),
                                   "encoder.W")
        self.encoder_b = Parameter(np.zeros(D), "encoder.b")
        self.blocks = [
            Block(D, base_len, max_len, kind, rng.derive(seed, f"block{i}"), norm=norm,
                  prenorm=prenorm, dropout=dropout, merge_style=merge_style,
                  fixed_decay=fixed_decay, bidirectional=bidirectional, engine=engine,
                  name=f"blocks.{i}")
            for i in range(depth)
        ]
        self.head_W = Parameter(gen.normal(0, 1 / np.sqrt(D), size=(n_classes, D)), "head.W")
        self.head_b = Parameter(np.zeros(n_classes), "head.b")
        self.pool = pool
        self.n_classes = n_classes
        self.in_dim = in_dim
        self.D = D
        self.mode = "train"

    def forward(self, x, training: bool = False, drop_rng=None) -> Var:
        h = ad.channel_linear(lift(x), self.encoder_W, self.encoder_b)
        for blk in self.blocks:
            h = blk.forward(h, training=training, drop_rng=drop_rng)
        if self.pool == "none":
            return ad.channel_linear(h, self.head_W, self.head_b)
        pooled = ops.mean_pool(h) if self.pool == "mean" else ops.last_pool(h)
        return ad.affine(pooled, self.head_W, self.head_b)

    def set_mode(self, mode: str) -> None:
        if mode not in ("train", "eval_branched", "eval_merged"):
            raise InvalidMode(f"unknown mode {mode!r}")
        self.mode = mode
        for blk in self.blocks:
            blk.set_mode(mode)

    def parameters(self) -> list[Parameter]:
        params = [self.encoder_W, self.encoder_b]
        for blk in self.blocks:
            params.extend(blk.parameters())
        params += [self.head_W, self.head_b]
        return params

    def buffers(self):
        out = []
        for blk in self.blocks:
            out.extend(blk.buffers())
        return out

    def logits_np(self, x: np.ndarray, batch: int = 256) -> np.ndarray:
        """Eval-mode forward in chunks, returning plain logits."""
        outs = []
        for lo in range(0, x.shape[0], batch):
            outs.append(self.forward(Var(x[lo:lo + batch])).data)
        return np.concatenate(outs, axis=0)
