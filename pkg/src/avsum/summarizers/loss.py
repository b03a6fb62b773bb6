from __future__ import annotations

import logging

import torch

from avsum.errors import ShapeError

log = logging.getLogger(__name__)

EPS = 1e-7


def class_weights(z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """w0 = mean(z) weighs negative frames, w1 = 1 - w0 the positives."""
    w0 = z.to(torch.float64).mean(dim=-1)
    return w0, 1.0 - w0


def weighted_bce(z, z_hat, eps: float = EPS) -> torch.Tensor:
    """Class-balanced binary cross entropy of one video, or mean over a batch.

    ``z`` (..., N) binary targets, ``z_hat`` (..., N) positive-class
    probabilities (clamped to [eps, 1 - eps]). Weights come from each
    video's own label balance.
    """
    z_hat = torch.as_tensor(z_hat)
    z = torch.as_tensor(z).to(z_hat.dtype)
    if z.shape != z_hat.shape:
        raise ShapeError(f"label shape {tuple(z.shape)} != score shape {tuple(z_hat.shape)}")
    w0, w1 = class_weights(z)
    w0, w1 = w0.to(z_hat.dtype).unsqueeze(-1), w1.to(z_hat.dtype).unsqueeze(-1)
    if torch.any((w0 == 0) | (w1 == 0)):
        log.warning("video with single-class labels: one class weight is zero")
    p = z_hat.clamp(eps, 1 - eps)
    w = torch.where(z > 0.5, w1, w0)
    per_frame = -w * (z * torch.log(p) + (1 - z) * torch.log(1 - p))
    return per_frame.mean(dim=-1).mean()
