"""Differentiable operators on time-major tensors.

All operators take ``(T, C)`` or batched ``(B, T, C)`` tensors, are
differentiated by torch autograd and make no use of global state, so a
forward pass is a pure function of (weights, input).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from avsum.errors import ShapeError


def _batched(x: torch.Tensor):
    if x.dim() == 2:
        return x.unsqueeze(0), True
    if x.dim() == 3:
        return x, False
    raise ShapeError(f"expected (T, C) or (B, T, C), got shape {tuple(x.shape)}")


def _unbatch(y, squeeze):
    return y.squeeze(0) if squeeze else y


def dense(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` of shape (in, out)."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"dense: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    y = x @ weight
    return y if bias is None else y + bias


def conv1d(x, weight, bias=None):
    """Stride-1, same-padded temporal convolution.

    ``weight`` has torch layout (C_out, C_in, k). Even kernels pad one more
    frame on the right.
    """
    xb, squeeze = _batched(x)
    c_out, c_in, k = weight.shape
    if xb.shape[-1] != c_in:
        raise ShapeError(f"conv1d: input has {xb.shape[-1]} channels, kernel expects {c_in}")
    left, right = (k - 1) // 2, k // 2
    t = xb.shape[1]
    if k > t + left + right:
        raise ShapeError(f"conv1d: kernel {k} longer than padded input {t + left + right}")
    h = F.pad(xb.transpose(1, 2), (left, right))
    y = F.conv1d(h, weight, bias).transpose(1, 2)
    return _unbatch(y, squeeze)


def maxpool_time(x, factor: int):
    """Non-overlapping temporal max pool; ties route to the first index."""
    xb, squeeze = _batched(x)
    b, t, c = xb.shape
    if factor < 1 or t % factor:
        raise ShapeError(f"maxpool_time: length {t} not divisible by factor {factor}")
    y = xb.reshape(b, t // factor, factor, c).max(dim=2).values
    return _unbatch(y, squeeze)


def deconv1d_time(x, weight, factor: int, bias=None):
    """Transposed convolution with kernel = stride = ``factor``.

    ``weight`` has torch layout (C_in, C_out, factor); output length is
    ``T * factor``. Without bias this is the adjoint of
    :func:`conv_strided` with the same weight.
    """
    if factor < 1:
        raise ShapeError(f"deconv1d_time: factor must be >= 1, got {factor}")
    if weight.shape[-1] != factor:
        raise ShapeError(f"deconv1d_time: kernel length {weight.shape[-1]} != factor {factor}")
    xb, squeeze = _batched(x)
    if xb.shape[-1] != weight.shape[0]:
        raise ShapeError(f"deconv1d_time: input has {xb.shape[-1]} channels, weight expects {weight.shape[0]}")
    y = F.conv_transpose1d(xb.transpose(1, 2), weight, bias, stride=factor).transpose(1, 2)
    return _unbatch(y, squeeze)


def conv_strided(y, weight, factor: int):
    """Strided convolution whose adjoint is :func:`deconv1d_time`."""
    yb, squeeze = _batched(y)
    x = F.conv1d(yb.transpose(1, 2), weight, stride=factor).transpose(1, 2)
    return _unbatch(x, squeeze)


def softmax(x, dim: int = -1):
    return torch.softmax(x, dim=dim)


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh):
    """One GRU step, gate order (reset, update, candidate).

    r = sig(W_ir x + b_ir + W_hr h + b_hr)
    z = sig(W_iz x + b_iz + W_hz h + b_hz)
    n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
    h' = (1 - z) * n + z * h
    """
    gi = x @ w_ih.T + b_ih
    gh = h @ w_hh.T + b_hh
    i_r, i_z, i_n = gi.chunk(3, dim=-1)
    h_r, h_z, h_n = gh.chunk(3, dim=-1)
    r = torch.sigmoid(i_r + h_r)
    z = torch.sigmoid(i_z + h_z)
    n = torch.tanh(i_n + r * h_n)
    return (1 - z) * n + z * h


def gru_forward(x, w_ih, w_hh, b_ih, b_hh):
    """Run a GRU from a zero state; returns (outputs (.., T, G), final (.., G))."""
    xb, squeeze = _batched(x)
    g = w_hh.shape[1]
    if w_ih.shape != (3 * g, xb.shape[-1]):
        raise ShapeError(f"gru: w_ih has shape {tuple(w_ih.shape)}, expected {(3 * g, xb.shape[-1])}")
    h = xb.new_zeros(xb.shape[0], g)
    outs = []
    for t in range(xb.shape[1]):
        h = gru_cell(xb[:, t], h, w_ih, w_hh, b_ih, b_hh)
        outs.append(h)
    outputs = torch.stack(outs, dim=1)
    if squeeze:
        return outputs.squeeze(0), h.squeeze(0)
    return outputs, h


@dataclass
class AttentionWeights:
    """Per-head projections ``wq, wk, wv`` of shape (H, S, S/H) and the
    output projection ``wo`` (M, M), applied on the left of the
    concatenated heads."""

    wq: torch.Tensor
    wk: torch.Tensor
    wv: torch.Tensor
    wo: torch.Tensor

    @property
    def heads(self) -> int:
        return self.wq.shape[0]

    def validate(self, s: int):
        h = self.heads
        if s % h:
            raise ShapeError(f"attention width {s} not divisible by {h} heads")
        for name in ("wq", "wk", "wv"):
            w = getattr(self, name)
            if tuple(w.shape) != (h, s, s // h):
                raise ShapeError(f"{name} has shape {tuple(w.shape)}, expected {(h, s, s // h)}")


def attention_scores(q, k, scale_dim: float):
    return torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(scale_dim), dim=-1)


def mha(q, k, v, weights: AttentionWeights, scale_dim: float, return_scores: bool = False):
    """Multi-head attention.

    head_h = softmax(Q Wq_h (K Wk_h)^T / sqrt(scale_dim)) V Wv_h; heads are
    concatenated along features to (M_q, S) and ``wo`` (M_q, M_q) multiplies
    from the left.
    """
    qb, squeeze = _batched(q)
    kb, _ = _batched(k)
    vb, _ = _batched(v)
    if kb.shape[1] != vb.shape[1] or qb.shape[-1] != kb.shape[-1] or kb.shape[-1] != vb.shape[-1]:
        raise ShapeError(
            f"mha: incompatible Q/K/V shapes {tuple(qb.shape)}, {tuple(kb.shape)}, {tuple(vb.shape)}"
        )
    weights.validate(qb.shape[-1])
    m_q = qb.shape[1]
    if tuple(weights.wo.shape) != (m_q, m_q):
        raise ShapeError(f"mha: wo has shape {tuple(weights.wo.shape)}, expected {(m_q, m_q)}")
    heads, scores = [], []
    for h in range(weights.heads):
        a = attention_scores(qb @ weights.wq[h], kb @ weights.wk[h], scale_dim)
        scores.append(a)
        heads.append(a @ (vb @ weights.wv[h]))
    out = weights.wo @ torch.cat(heads, dim=-1)
    out = _unbatch(out, squeeze)
    if return_scores:
        s = torch.stack(scores, dim=1)
        return out, (s.squeeze(0) if squeeze else s)
    return out
