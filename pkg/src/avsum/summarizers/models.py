"""Fully convolutional summarizers.

Trunk (shared by every variant)::

    conv1..conv4   k=3 conv + ReLU + temporal max pool /2   (N -> N/16)
    [attention]    multi-head self-attention on the conv4 output (TA only)
    bottleneck     k=1 conv + ReLU
    deconv1        transposed conv x4 + ReLU
    deconv2        transposed conv x4 -> C logits per frame

Variants differ in input width and head:

    sum-fcn     visual features only
    avsum-gru   visual + GRU embeddings (early fusion)
    avsum-scav  visual + attributes; attributes also skip to the deconv2
                output and a dense layer maps C+2 -> C
    ta-avsum    avsum-gru with self-attention after conv4
    sa-avsum    avsum-gru whose deconv2 output is re-weighted by a
                single-head attention with queries from the embeddings
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from avsum.errors import ShapeError, ValidationError
from avsum.nn.layers import Dense, MultiHeadSelfAttention, TemporalConv, TemporalDeconv, seeded
from avsum.nn.ops import maxpool_time

VARIANTS = ("sum-fcn", "avsum-gru", "avsum-scav", "ta-avsum", "sa-avsum")
AFFECT_KIND = {"sum-fcn": None, "avsum-gru": "GRU", "avsum-scav": "AV", "ta-avsum": "GRU", "sa-avsum": "GRU"}


@dataclass
class SummarizerSpec:
    variant: str
    visual_dim: int = 1024
    affect_dim: int = 20            # 2G for GRU fusion, 2 for AV fusion (ignored by sum-fcn)
    n_frames: int = 320
    enc_channels: tuple[int, ...] = (128, 256, 512, 512)
    bottleneck: int = 512
    dec_channels: int = 64
    dec_factors: tuple[int, int] = (4, 4)
    kernel: int = 3
    n_classes: int = 2
    heads: int = 4
    attn_scale: str | float = "temporal"
    residual: bool = True
    sa_dim: int = 16
    encoder_skip: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        self.enc_channels = tuple(self.enc_channels)
        self.dec_factors = tuple(self.dec_factors)
        if AFFECT_KIND[self.variant] == "AV":
            self.affect_dim = 2
        if self.n_frames % self.pool_factor:
            raise ValidationError(f"N={self.n_frames} not divisible by encoder pooling {self.pool_factor}")
        if math.prod(self.dec_factors) != self.pool_factor:
            raise ValidationError(f"decoder factors {self.dec_factors} do not undo pooling {self.pool_factor}")
        if self.variant == "ta-avsum" and self.enc_channels[-1] % self.heads:
            raise ValidationError(f"S={self.enc_channels[-1]} not divisible by H={self.heads}")

    @property
    def pool_factor(self) -> int:
        return 2 ** len(self.enc_channels)

    @property
    def affect_kind(self) -> str | None:
        return AFFECT_KIND[self.variant]

    @property
    def in_width(self) -> int:
        return self.visual_dim + (0 if self.affect_kind is None else self.affect_dim)

    @property
    def bottleneck_len(self) -> int:
        return self.n_frames // self.pool_factor

    def to_dict(self):
        d = asdict(self)
        d["enc_channels"] = list(self.enc_channels)
        d["dec_factors"] = list(self.dec_factors)
        return d


def reduced_spec(variant: str, n_frames: int = 32, visual_dim: int = 16, hidden: int = 4,
                 heads: int = 2, **overrides) -> SummarizerSpec:
    """Small configuration for gradient checks and fast tests."""
    kw = dict(
        variant=variant, visual_dim=visual_dim, affect_dim=2 * hidden, n_frames=n_frames,
        enc_channels=(4, 8, 8, 8), bottleneck=8, dec_channels=4, heads=heads, sa_dim=4,
    )
    kw.update(overrides)
    return SummarizerSpec(**kw)


class Summarizer(nn.Module):
    def __init__(self, spec: SummarizerSpec):
        super().__init__()
        self.spec = spec
        widths = (spec.in_width,) + spec.enc_channels
        self.encoder = nn.ModuleList(TemporalConv(a, b, spec.kernel) for a, b in zip(widths, widths[1:]))
        s = spec.enc_channels[-1]
        self.attention = (
            MultiHeadSelfAttention(s, spec.heads, spec.bottleneck_len, spec.attn_scale, spec.residual)
            if spec.variant == "ta-avsum" else None
        )
        self.bottleneck = TemporalConv(s, spec.bottleneck, 1)
        f1, f2 = spec.dec_factors
        self.deconv1 = TemporalDeconv(spec.bottleneck, spec.dec_channels, f1)
        self.deconv2 = TemporalDeconv(spec.dec_channels, spec.n_classes, f2)
        if spec.encoder_skip:
            # encoder level whose length matches the deconv1 output
            self.skip_level = len(spec.enc_channels) - int(round(math.log2(f1))) - 1
            self.skip = TemporalConv(spec.enc_channels[self.skip_level], spec.dec_channels, 1)
        c = spec.n_classes
        if spec.variant == "avsum-scav":
            self.mlp = Dense(c + 2, c)
        if spec.variant == "sa-avsum":
            self.sa_wq = nn.Parameter(torch.randn(spec.affect_dim, spec.sa_dim) / math.sqrt(spec.affect_dim))
            self.sa_wk = nn.Parameter(torch.randn(spec.n_frames, spec.sa_dim) / math.sqrt(spec.n_frames))
            self.sa_wv = nn.Parameter(torch.randn(spec.n_frames, c) / math.sqrt(spec.n_frames))
            self.mlp = Dense(2 * c, c)

    def encode(self, x):
        """conv1..conv4 output X (B, N/16, S); returns also per-level outputs."""
        levels = []
        for conv in self.encoder:
            x = maxpool_time(torch.relu(conv(x)), 2)
            levels.append(x)
        return x, levels

    def trunk(self, x, return_scores: bool = False):
        scores = None
        h, levels = self.encode(x)
        if self.attention is not None:
            h, scores = self.attention(h, return_scores=True)
        h = torch.relu(self.bottleneck(h))
        h = self.deconv1(h)
        if self.spec.encoder_skip:
            h = h + self.skip(levels[self.skip_level])
        h = self.deconv2(torch.relu(h))
        return (h, scores) if return_scores else h

    def sa_scores(self, side, s_trunk):
        """softmax((f W_q)(s^T W_k)^T / sqrt(d)) -> (B, N, C), rows over classes."""
        q = side @ self.sa_wq                                   # (B, N, d)
        k = s_trunk.transpose(1, 2) @ self.sa_wk                # (B, C, d)
        return torch.softmax(q @ k.transpose(1, 2) / math.sqrt(self.spec.sa_dim), dim=-1)

    def forward(self, x, side=None):
        """Per-frame class logits (B, N, C) for fused input ``x`` (B, N, W)."""
        spec = self.spec
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
            side = None if side is None else side.unsqueeze(0)
        if x.shape[1] != spec.n_frames or x.shape[2] != spec.in_width:
            raise ShapeError(f"{spec.variant}: expected input (B, {spec.n_frames}, {spec.in_width}), "
                             f"got {tuple(x.shape)}")
        logits = self.trunk(x)
        if spec.variant in ("avsum-scav", "sa-avsum"):
            if side is None or side.shape[:2] != x.shape[:2] or side.shape[2] != spec.affect_dim:
                raise ShapeError(f"{spec.variant}: side input must be (B, {spec.n_frames}, {spec.affect_dim})")
        if spec.variant == "avsum-scav":
            logits = self.mlp(torch.cat([logits, side], dim=-1))
        elif spec.variant == "sa-avsum":
            att = self.sa_scores(side, logits) @ (logits.transpose(1, 2) @ self.sa_wv)   # (B, N, C)
            logits = self.mlp(torch.cat([att, logits], dim=-1))
        return logits.squeeze(0) if squeeze else logits


def build_summarizer(spec: SummarizerSpec, seed: int = 0) -> Summarizer:
    with seeded(seed):
        return Summarizer(spec)


@dataclass
class SummaryOutput:
    probs: np.ndarray        # (N, C) softmax probabilities, column 1 = key frame
    decisions: np.ndarray = field(init=False)

    def __post_init__(self):
        self.decisions = decide(self.probs)


def decide(probs) -> np.ndarray:
    """Key frame iff positive probability >= negative (ties select the frame)."""
    p = np.asarray(probs)
    return (p[..., 1] >= p[..., 0]).astype(np.int8)


@torch.no_grad()
def predict(model: Summarizer, x, side=None) -> SummaryOutput:
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(np.asarray(x), dtype=dtype)
    side = None if side is None else torch.as_tensor(np.asarray(side), dtype=dtype)
    return SummaryOutput(torch.softmax(model(x, side), dim=-1).numpy())
