"""Finite-difference verification of autograd gradients.

The analytic gradient of a scalar function is compared entry by entry with
central differences ``(f(x + h) - f(x - h)) / 2h``. The relative error of
one entry is

    |a - n| / max(|a|, |n|, 1e-3 * G, 1e-12)

where G is the largest gradient magnitude seen in the check. The floor
keeps entries whose true gradient is ~0 from turning finite-difference
round-off (~1e-11 at h=1e-5 in float64) into spurious failures.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import torch

from avsum.errors import GradientError


@dataclass
class GradcheckReport:
    name: str
    max_rel_err: float
    n_entries: int
    tolerance: float
    worst: str
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def gradcheck(
    fn: Callable[[], torch.Tensor],
    tensors: dict[str, torch.Tensor],
    tol: float = 1e-4,
    step: float = 1e-5,
    name: str = "",
    seed: int | None = None,
) -> GradcheckReport:
    """Check d fn() / d tensors; ``tensors`` must be float64 leaves."""
    for key, t in tensors.items():
        if t.dtype != torch.float64:
            raise GradientError(f"{name}: gradcheck requires float64, {key} is {t.dtype}")
        t.requires_grad_(True)
        t.grad = None
    out = fn()
    if out.numel() != 1:
        raise GradientError(f"{name}: function must return a scalar, got shape {tuple(out.shape)}")
    out.backward()
    analytic = {}
    for key, t in tensors.items():
        g = torch.zeros_like(t) if t.grad is None else t.grad.detach().clone()
        if not torch.all(torch.isfinite(g)):
            raise GradientError(f"{name}: non-finite analytic gradient for {key}")
        analytic[key] = g

    numeric = {}
    with torch.no_grad():
        for key, t in tensors.items():
            flat = t.view(-1)
            num = torch.empty_like(flat)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                f_plus = fn().item()
                flat[i] = orig - step
                f_minus = fn().item()
                flat[i] = orig
                num[i] = (f_plus - f_minus) / (2 * step)
            numeric[key] = num.view_as(t)

    scale = max(
        [float(g.abs().max()) for g in analytic.values() if g.numel()]
        + [float(g.abs().max()) for g in numeric.values() if g.numel()]
        + [0.0]
    )
    floor = max(1e-3 * scale, 1e-12)
    worst, worst_err, n = "", 0.0, 0
    for key in tensors:
        a, nu = analytic[key].view(-1), numeric[key].view(-1)
        n += a.numel()
        if not a.numel():
            continue
        denom = torch.clamp(torch.maximum(a.abs(), nu.abs()), min=floor)
        err = (a - nu).abs() / denom
        i = int(err.argmax())
        if float(err[i]) > worst_err or not worst:
            worst_err, worst = float(err[i]), f"{key}[{i}]"
    for t in tensors.values():
        t.grad = None
    return GradcheckReport(name, worst_err, n, tol, worst, seed)


class _CorruptGrad(torch.autograd.Function):
    """Identity forward, backward scaled by 1.01 (negative control)."""

    @staticmethod
    def forward(ctx, x):
        return x.clone()

    @staticmethod
    def backward(ctx, g):
        return g * 1.01


def corrupt_gradient(x: torch.Tensor) -> torch.Tensor:
    return _CorruptGrad.apply(x)
