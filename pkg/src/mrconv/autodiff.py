"""Reverse-mode differentiation over float64 ndarrays.

A `Tape` records every op executed inside its `with` block, in forward order.
`Tape.backward(loss)` replays the recorded adjoints in exact reverse order and
accumulates gradients into the participating `Parameter` leaves. Ops executed
with no active tape still compute eagerly but record nothing, which is the
eval path.

Only the op set used by this library is implemented; each op pairs the forward
computation with its analytic adjoint. Broadcasting follows numpy rules and
adjoints sum gradients back down to the operand shape.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import erf as _erf

from .errors import EmptyTape, ShapeError

_STATE = threading.local()


def active_tape():
    return getattr(_STATE, "tape", None)


class Tape:
    """Forward-order op record plus the parameter registry for one training step."""

    def __init__(self):
        self.nodes: list[Var] = []
        self.kernel_params: dict[int, "Parameter"] = {}
        self.other_params: dict[int, "Parameter"] = {}

    def __enter__(self):
        if active_tape() is not None:
            raise RuntimeError("tapes do not nest")
        _STATE.tape = self
        return self

    def __exit__(self, *exc):
        _STATE.tape = None
        return False

    def watch(self, p: "Parameter") -> None:
        reg = self.kernel_params if p.group == "kernel" else self.other_params
        reg.setdefault(id(p), p)

    def parameters(self) -> list["Parameter"]:
        return list(self.kernel_params.values()) + list(self.other_params.values())

    def backward(self, loss: "Var") -> None:
        if not self.nodes:
            raise EmptyTape("no ops recorded before backward()")
        if loss.data.size != 1:
            raise ShapeError(f"backward expects a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            if node.grad is None or node._vjp is None:
                continue
            node._vjp(node.grad)
        # free activation grads, keep leaf grads for the optimizer
        for node in self.nodes:
            node.grad = None


class Var:
    """Value node: ndarray payload plus the adjoint closure recorded on the tape."""

    __slots__ = ("data", "grad", "_vjp", "requires")

    def __init__(self, data, requires: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._vjp = None
        self.requires = requires

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        self.grad = g if self.grad is None else self.grad + g

    # convenience operators used by layer/model code
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Parameter(Var):
    """Trainable leaf. `group` is "kernel" (convolution kernels) or "other".

    `version` increments on every in-place update; the merged-kernel cache uses
    it to detect staleness.
    """

    __slots__ = ("name", "group", "version")

    def __init__(self, data, name: str, group: str = "other"):
        if group not in ("kernel", "other"):
            raise ValueError(f"unknown parameter group {group!r}")
        super().__init__(np.array(data, dtype=np.float64, copy=True), requires=True)
        self.name = name
        self.group = group
        self.version = 0

    def update(self, new_data: np.ndarray) -> None:
        if new_data.shape != self.data.shape:
            raise ShapeError(f"parameter {self.name}: shape changed {self.data.shape} -> {new_data.shape}")
        self.data = np.asarray(new_data, dtype=np.float64)
        self.version += 1


def lift(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def make(data, parents, vjp) -> Var:
    """Create a result Var; record it if a tape is active and a parent participates."""
    tape = active_tape()
    out = Var(data)
    if tape is not None and any(p.requires for p in parents):
        out.requires = True
        out._vjp = vjp
        tape.nodes.append(out)
        for p in parents:
            if isinstance(p, Parameter):
                tape.watch(p)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Var:
    a, b = lift(a), lift(b)
    out_data = a.data + b.data

    def vjp(g):
        if a.requires:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return make(out_data, (a, b), vjp)


def sub(a, b) -> Var:
    a, b = lift(a), lift(b)
    out_data = a.data - b.data

    def vjp(g):
        if a.requires:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires:
            b.accumulate(_unbroadcast(-g, b.data.shape))

    return make(out_data, (a, b), vjp)


def mul(a, b) -> Var:
    a, b = lift(a), lift(b)
    out_data = a.data * b.data

    def vjp(g):
        if a.requires:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return make(out_data, (a, b), vjp)


def div(a, b) -> Var:
    a, b = lift(a), lift(b)
    out_data = a.data / b.data

    def vjp(g):
        if a.requires:
            a.accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires:
            b.accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return make(out_data, (a, b), vjp)


def scale(a, c: float) -> Var:
    a = lift(a)

    def vjp(g):
        if a.requires:
            a.accumulate(g * c)

    return make(a.data * c, (a,), vjp)


def sqrt(a) -> Var:
    a = lift(a)
    root = np.sqrt(a.data)

    def vjp(g):
        if a.requires:
            a.accumulate(g * 0.5 / root)

    return make(root, (a,), vjp)


def exp(a) -> Var:
    a = lift(a)
    e = np.exp(a.data)

    def vjp(g):
        if a.requires:
            a.accumulate(g * e)

    return make(e, (a,), vjp)


def log(a) -> Var:
    a = lift(a)

    def vjp(g):
        if a.requires:
            a.accumulate(g / a.data)

    return make(np.log(a.data), (a,), vjp)


def erf(a) -> Var:
    a = lift(a)

    def vjp(g):
        if a.requires:
            a.accumulate(g * (2.0 / np.sqrt(np.pi)) * np.exp(-a.data * a.data))

    return make(_erf(a.data), (a,), vjp)


def sigmoid(a) -> Var:
    a = lift(a)
    # stable split form, exact for float64
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def vjp(g):
        if a.requires:
            a.accumulate(g * s * (1.0 - s))

    return make(s, (a,), vjp)


# ---------------------------------------------------------------------------
# shape and reduction ops


def reshape(a, shape) -> Var:
    a = lift(a)
    old = a.data.shape

    def vjp(g):
        if a.requires:
            a.accumulate(g.reshape(old))

    return make(a.data.reshape(shape), (a,), vjp)


def mean(a, axis, keepdims: bool = False) -> Var:
    a = lift(a)
    axis = (axis,) if isinstance(axis, int) else tuple(axis)
    count = int(np.prod([a.data.shape[ax] for ax in axis]))
    out_data = a.data.mean(axis=axis, keepdims=keepdims)

    def vjp(g):
        if a.requires:
            gg = g if keepdims else np.expand_dims(g, axis)
            a.accumulate(np.broadcast_to(gg, a.data.shape) / count)

    return make(out_data, (a,), vjp)


def total(a) -> Var:
    """Sum of all entries, as a scalar Var."""
    a = lift(a)

    def vjp(g):
        if a.requires:
            a.accumulate(np.broadcast_to(g, a.data.shape).copy())

    return make(a.data.sum(), (a,), vjp)


def slice_axis(a, axis: int, start: int, stop: int) -> Var:
    a = lift(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def vjp(g):
        if a.requires:
            full = np.zeros_like(a.data)
            full[idx] = g
            a.accumulate(full)

    return make(a.data[idx], (a,), vjp)


def take_last_axis(a, positions: np.ndarray) -> Var:
    """Gather fixed positions along the last axis (used for labelled time steps)."""
    a = lift(a)
    positions = np.asarray(positions, dtype=np.intp)

    def vjp(g):
        if a.requires:
            full = np.zeros_like(a.data)
            full[..., positions] += g
            a.accumulate(full)

    return make(a.data[..., positions], (a,), vjp)


def pad_last(a, left: int, right: int) -> Var:
    a = lift(a)
    pad = [(0, 0)] * (a.data.ndim - 1) + [(left, right)]
    n = a.data.shape[-1]

    def vjp(g):
        if a.requires:
            a.accumulate(g[..., left:left + n])

    return make(np.pad(a.data, pad), (a,), vjp)


def reverse_time(a) -> Var:
    a = lift(a)

    def vjp(g):
        if a.requires:
            a.accumulate(g[..., ::-1])

    return make(a.data[..., ::-1].copy(), (a,), vjp)


def concat_channels(parts) -> Var:
    parts = [lift(p) for p in parts]
    sizes = [p.data.shape[1] for p in parts]
    offs = np.cumsum([0] + sizes)

    def vjp(g):
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            if p.requires:
                p.accumulate(g[:, lo:hi])

    return make(np.concatenate([p.data for p in parts], axis=1), tuple(parts), vjp)


# ---------------------------------------------------------------------------
# linear maps


def channel_linear(x, W, b=None) -> Var:
    """Pointwise channel mix: (B, Din, L) x (Dout, Din) -> (B, Dout, L)."""
    x, W = lift(x), lift(W)
    parents = [x, W]
    out_data = np.einsum("od,bdl->bol", W.data, x.data)
    if b is not None:
        b = lift(b)
        parents.append(b)
        out_data = out_data + b.data[None, :, None]

    def vjp(g):
        if W.requires:
            W.accumulate(np.einsum("bol,bdl->od", g, x.data))
        if x.requires:
            x.accumulate(np.einsum("od,bol->bdl", W.data, g))
        if b is not None and b.requires:
            b.accumulate(g.sum(axis=(0, 2)))

    return make(out_data, tuple(parents), vjp)


def affine(x, W, b=None) -> Var:
    """Dense map on pooled features: (B, Din) x (Dout, Din) -> (B, Dout)."""
    x, W = lift(x), lift(W)
    parents = [x, W]
    out_data = x.data @ W.data.T
    if b is not None:
        b = lift(b)
        parents.append(b)
        out_data = out_data + b.data[None, :]

    def vjp(g):
        if W.requires:
            W.accumulate(g.T @ x.data)
        if x.requires:
            x.accumulate(g @ W.data)
        if b is not None and b.requires:
            b.accumulate(g.sum(axis=0))

    return make(out_data, tuple(parents), vjp)


def scatter_last(values, positions: np.ndarray, length: int) -> Var:
    """Embed (D, s) values at integer positions into a (D, length) array.

    Positions may be a shared (s,) vector or per-channel (D, s); the adjoint is
    the gather of the output gradient at the same positions.
    """
    values = lift(values)
    D, s = values.data.shape
    positions = np.asarray(positions, dtype=np.intp)
    if positions.ndim == 1:
        positions = np.broadcast_to(positions, (D, s))
    rows = np.arange(D)[:, None]
    out_data = np.zeros((D, length), dtype=np.float64)
    out_data[rows, positions] = values.data

    def vjp(g):
        if values.requires:
            values.accumulate(g[rows, positions])

    return make(out_data, (values,), vjp)
