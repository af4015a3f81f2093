"""AdamW with two parameter groups and the warmup-cosine schedule.

Kernel parameters train with their own (typically smaller) learning rate and
never receive weight decay; everything else uses the global rate and the
configured decoupled decay.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Parameter
from .errors import NumericsError


def lr_schedule(step: int, total: int, warmup: int, base_lr: float) -> float:
    """Linear 0 -> base_lr over `warmup` steps, then cosine to 0 at `total`."""
    if warmup >= total:
        raise ValueError(f"warmup {warmup} must be < total {total}")
    if warmup > 0 and step < warmup:
        return base_lr * step / warmup
    progress = (step - warmup) / (total - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))


class AdamW:
    def __init__(self, kernel_params, other_params, lr: float = 3e-3,
                 kernel_lr: float = 1e-3, weight_decay: float = 0.05,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.groups = [
            {"params": list(kernel_params), "lr": kernel_lr, "weight_decay": 0.0},
            {"params": list(other_params), "lr": lr, "weight_decay": weight_decay},
        ]
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def zero_grad(self) -> None:
        for group in self.groups:
            for p in group["params"]:
                p.grad = None

    def step(self, lr_scale: float = 1.0) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for group in self.groups:
            lr = group["lr"] * lr_scale
            wd = group["weight_decay"]
            for p in group["params"]:
                g = p.grad
                if g is None:
                    continue
                if not np.isfinite(g).all():
                    raise NumericsError(
                        f"non-finite gradient for {p.name} at step {t} "
                        f"(|g|_max={np.abs(g[np.isfinite(g)]).max(initial=0.0):.3e})")
                m = self._m.setdefault(id(p), np.zeros_like(p.data))
                v = self._v.setdefault(id(p), np.zeros_like(p.data))
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * g * g
                update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                p.update(p.data - lr * update - lr * wd * p.data)


def split_param_groups(params) -> tuple[list[Parameter], list[Parameter]]:
    kernel = [p for p in params if p.group == "kernel"]
    other = [p for p in params if p.group == "other"]
    return kernel, other
