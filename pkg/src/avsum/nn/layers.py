"""Parameterised layers over :mod:`avsum.nn.ops`.

Initialisation: fan-in scaled uniform for dense/conv/deconv kernels,
orthogonal blocks for GRU recurrences. Build models inside
:func:`seeded` to make initialisation reproducible.
"""

from __future__ import annotations

import contextlib
import math

import torch
from torch import nn

from avsum.nn import ops


@contextlib.contextmanager
def seeded(seed: int):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def _uniform(shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return nn.Parameter(torch.empty(shape).uniform_(-bound, bound))


class Dense(nn.Module):
    def __init__(self, d_in: int, d_out: int):
        super().__init__()
        self.weight = _uniform((d_in, d_out), d_in)
        self.bias = _uniform((d_out,), d_in)

    def forward(self, x):
        return ops.dense(x, self.weight, self.bias)


class TemporalConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernel: int = 3):
        super().__init__()
        self.weight = _uniform((c_out, c_in, kernel), c_in * kernel)
        self.bias = _uniform((c_out,), c_in * kernel)

    def forward(self, x):
        return ops.conv1d(x, self.weight, self.bias)


class TemporalDeconv(nn.Module):
    def __init__(self, c_in: int, c_out: int, factor: int):
        super().__init__()
        self.factor = factor
        self.weight = _uniform((c_in, c_out, factor), c_in)
        self.bias = _uniform((c_out,), c_in)

    def forward(self, x):
        return ops.deconv1d_time(x, self.weight, self.factor, self.bias)


class GRU(nn.Module):
    def __init__(self, d_in: int, hidden: int):
        super().__init__()
        self.hidden = hidden
        self.w_ih = _uniform((3 * hidden, d_in), d_in)
        w_hh = torch.empty(3 * hidden, hidden)
        for block in w_hh.split(hidden):
            nn.init.orthogonal_(block)
        self.w_hh = nn.Parameter(w_hh)
        self.b_ih = _uniform((3 * hidden,), hidden)
        self.b_hh = _uniform((3 * hidden,), hidden)

    def forward(self, x):
        return ops.gru_forward(x, self.w_ih, self.w_hh, self.b_ih, self.b_hh)


class MultiHeadSelfAttention(nn.Module):
    """Self-attention over a fixed-length (M, S) sequence.

    ``scale`` is ``"temporal"`` (divide by sqrt(M)), ``"head"`` (sqrt(S/H))
    or a positive number used directly as the divisor's argument.
    """

    def __init__(self, width: int, heads: int, length: int, scale="temporal", residual: bool = True):
        super().__init__()
        if width % heads:
            raise ValueError(f"width {width} not divisible by {heads} heads")
        self.width, self.heads, self.length = width, heads, length
        self.scale, self.residual = scale, residual
        d = width // heads
        std = 1.0 / math.sqrt(width)
        self.wq = nn.Parameter(torch.randn(heads, width, d) * std)
        self.wk = nn.Parameter(torch.randn(heads, width, d) * std)
        self.wv = nn.Parameter(torch.randn(heads, width, d) * std)
        self.wo = nn.Parameter(torch.eye(length))

    @property
    def scale_dim(self) -> float:
        if self.scale == "temporal":
            return float(self.length)
        if self.scale == "head":
            return float(self.width // self.heads)
        return float(self.scale)

    def weights(self) -> ops.AttentionWeights:
        return ops.AttentionWeights(self.wq, self.wk, self.wv, self.wo)

    def forward(self, x, return_scores: bool = False):
        out, scores = ops.mha(x, x, x, self.weights(), self.scale_dim, return_scores=True)
        if self.residual:
            out = x + out
        return (out, scores) if return_scores else out
