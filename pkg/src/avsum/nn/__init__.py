from avsum.nn.checkpoint import arch_hash, load_checkpoint, save_checkpoint
from avsum.nn.gradcheck import GradcheckReport, gradcheck
from avsum.nn.layers import GRU, Dense, MultiHeadSelfAttention, TemporalConv, TemporalDeconv, seeded
from avsum.nn.ops import (
    AttentionWeights,
    conv1d,
    conv_strided,
    deconv1d_time,
    dense,
    gru_cell,
    gru_forward,
    maxpool_time,
    mha,
    softmax,
)

__all__ = [
    "AttentionWeights",
    "Dense",
    "GRU",
    "GradcheckReport",
    "MultiHeadSelfAttention",
    "TemporalConv",
    "TemporalDeconv",
    "arch_hash",
    "conv1d",
    "conv_strided",
    "deconv1d_time",
    "dense",
    "gradcheck",
    "gru_cell",
    "gru_forward",
    "load_checkpoint",
    "maxpool_time",
    "mha",
    "save_checkpoint",
    "seeded",
    "softmax",
]
