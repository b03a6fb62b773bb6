"""Continuous emotion recognizer.

A window of 2*delta frame features around frame i passes through two
same-padded temporal convolutions (ReLU), a temporal max pool down to 5
steps, a GRU and a scalar dense head. The GRU's final state is the
frame's affective embedding, the dense output its attribute estimate.
One model is trained per attribute with the negated concordance
correlation coefficient as loss.
"""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from avsum.data.folds import Fold, ratio_split
from avsum.data.formats import CorpusManifest, FeatureSequence, SummaryAnnotation
from avsum.errors import ShapeError, ValidationError
from avsum.nn.checkpoint import arch_hash, file_digest, load_checkpoint, save_checkpoint
from avsum.nn.layers import GRU, Dense, TemporalConv, seeded
from avsum.nn.ops import maxpool_time

log = logging.getLogger(__name__)

ATTRIBUTES = ("activation", "valence")


def window_index(n_frames: int, delta: int) -> np.ndarray:
    """(N, 2*delta) frame indices, window i covering i-delta+1 .. i+delta, edge-replicated."""
    if delta < 1:
        raise ValidationError(f"delta must be >= 1, got {delta}")
    if n_frames < 1:
        raise ValidationError("cannot build windows over an empty sequence")
    offsets = np.arange(-delta + 1, delta + 1)
    return np.clip(np.arange(n_frames)[:, None] + offsets[None, :], 0, n_frames - 1)


def build_windows(seq: FeatureSequence | np.ndarray, delta: int = 10) -> np.ndarray:
    """Stack of per-frame windows, shape (N, D, 2*delta)."""
    data = seq.data if isinstance(seq, FeatureSequence) else np.asarray(seq)
    idx = window_index(data.shape[0], delta)
    return np.ascontiguousarray(data[idx].transpose(0, 2, 1))


class CerNet(nn.Module):
    def __init__(self, dim: int, window: int = 20, filters: int = 10, kernel: int = 3,
                 pooled: int = 5, hidden: int = 10):
        super().__init__()
        if window % pooled:
            raise ValidationError(f"window {window} not divisible into {pooled} pooled steps")
        self.arch = dict(dim=dim, window=window, filters=filters, kernel=kernel, pooled=pooled, hidden=hidden)
        self.pool = window // pooled
        self.conv1 = TemporalConv(dim, filters, kernel)
        self.conv2 = TemporalConv(filters, filters, kernel)
        self.gru = GRU(filters, hidden)
        self.head = Dense(hidden, 1)

    @property
    def hidden(self) -> int:
        return self.arch["hidden"]

    def forward(self, windows: torch.Tensor):
        """``windows`` (B, D, T) -> (embedding (B, G), estimate (B,))."""
        if windows.dim() != 3 or windows.shape[1] != self.arch["dim"] or windows.shape[2] != self.arch["window"]:
            raise ShapeError(
                f"expected windows (B, {self.arch['dim']}, {self.arch['window']}), got {tuple(windows.shape)}"
            )
        x = windows.transpose(1, 2)
        x = torch.relu(self.conv1(x))
        x = torch.relu(self.conv2(x))
        x = maxpool_time(x, self.pool)
        _, g = self.gru(x)
        return g, self.head(g).squeeze(-1)

    @torch.no_grad()
    def infer(self, seq: FeatureSequence | np.ndarray, batch: int = 1024) -> tuple[np.ndarray, np.ndarray]:
        """Embeddings (N, G) and estimates (N,) for every frame of a sequence."""
        delta = self.arch["window"] // 2
        data = seq.data if isinstance(seq, FeatureSequence) else np.asarray(seq)
        if data.shape[1] != self.arch["dim"]:
            raise ShapeError(f"features have dim {data.shape[1]}, model expects {self.arch['dim']}")
        dtype = next(self.parameters()).dtype
        x = torch.as_tensor(data, dtype=dtype)
        idx = torch.as_tensor(window_index(len(data), delta))
        gs, ys = [], []
        for lo in range(0, len(data), batch):
            w = x[idx[lo:lo + batch]].transpose(1, 2)
            g, y = self(w)
            gs.append(g)
            ys.append(y)
        return torch.cat(gs).numpy(), torch.cat(ys).numpy()


def ccc_loss(y, y_hat) -> torch.Tensor:
    """Negated concordance correlation coefficient (population moments).

    -2 cov(y, y_hat) / (var y + var y_hat + (mean y - mean y_hat)^2).
    A zero denominator (both constant and equal) returns -1.
    """
    y = torch.as_tensor(y, dtype=torch.float64) if not torch.is_tensor(y) else y
    y_hat = torch.as_tensor(y_hat, dtype=y.dtype) if not torch.is_tensor(y_hat) else y_hat
    y, y_hat = y.reshape(-1), y_hat.reshape(-1)
    if y.shape != y_hat.shape:
        raise ShapeError(f"ccc: lengths differ ({y.numel()} vs {y_hat.numel()})")
    if y.numel() < 2:
        raise ValidationError("ccc needs at least two samples")
    my, mh = y.mean(), y_hat.mean()
    dy, dh = y - my, y_hat - mh
    vy, vh = (dy * dy).mean(), (dh * dh).mean()
    cov = (dy * dh).mean()
    denom = vy + vh + (my - mh) ** 2
    if denom.item() == 0.0:
        if torch.equal(y, y_hat.to(y.dtype)):
            return -torch.ones((), dtype=y_hat.dtype) + 0.0 * y_hat.sum()
        raise ValidationError("ccc denominator is zero for unequal sequences")
    return -2.0 * cov / denom


def ccc(y, y_hat) -> float:
    return -float(ccc_loss(y, y_hat))


@dataclass
class CerTrainConfig:
    attribute: str = "activation"
    lr: float = 1e-4
    batch_size: int = 256
    epochs: int = 30
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 0
    seed: int = 0
    delta: int = 10
    filters: int = 10
    kernel: int = 3
    hidden: int = 10

    def validate(self):
        if self.attribute not in ATTRIBUTES:
            raise ValidationError(f"attribute must be one of {ATTRIBUTES}, got {self.attribute!r}")
        if self.lr <= 0 or self.batch_size < 2 or self.epochs < 0:
            raise ValidationError("lr must be > 0, batch_size >= 2 and epochs >= 0")


@dataclass
class CerResult:
    model: CerNet
    config: CerTrainConfig
    split: Fold
    best_epoch: int
    best_val_ccc: float
    history: list[dict] = field(default_factory=list)

    def meta(self) -> dict:
        return {
            "kind": "cer",
            "attribute": self.config.attribute,
            "arch": self.model.arch,
            "arch_hash": arch_hash(self.model.arch),
            "seed": self.config.seed,
            "epoch": self.best_epoch,
            "val_ccc": self.best_val_ccc,
            "split": self.split.to_dict(),
        }


Corpus = Sequence[tuple[FeatureSequence, SummaryAnnotation]]


def load_videos(manifest: CorpusManifest) -> list[tuple[FeatureSequence, SummaryAnnotation]]:
    return [manifest.load_video(v) for v in manifest.ids]


def build_cer(dim: int, config: CerTrainConfig) -> CerNet:
    with seeded(config.seed):
        return CerNet(dim, 2 * config.delta, config.filters, config.kernel, 5, config.hidden)


def _targets(ann: SummaryAnnotation, attribute: str) -> np.ndarray:
    if ann.affect is None or attribute not in ann.affect:
        raise ValidationError(f"{ann.video_id}: no {attribute} targets in annotation")
    return ann.affect[attribute]


class _WindowBank:
    """All windows of a set of videos, gathered lazily per batch."""

    def __init__(self, videos: Corpus, delta: int, attribute: str):
        data, idx, tgt, offset = [], [], [], 0
        for seq, ann in videos:
            data.append(seq.data)
            idx.append(window_index(seq.n_frames, delta) + offset)
            tgt.append(_targets(ann, attribute))
            offset += seq.n_frames
        self.data = torch.from_numpy(np.concatenate(data))
        self.idx = torch.from_numpy(np.concatenate(idx))
        self.targets = torch.from_numpy(np.concatenate(tgt).astype(np.float32))

    def __len__(self):
        return len(self.idx)

    def batch(self, rows):
        return self.data[self.idx[rows]].transpose(1, 2), self.targets[rows]


@torch.no_grad()
def _predict_bank(model: CerNet, bank: _WindowBank, batch: int = 2048) -> torch.Tensor:
    out = []
    for lo in range(0, len(bank), batch):
        w, _ = bank.batch(torch.arange(lo, min(lo + batch, len(bank))))
        out.append(model(w)[1])
    return torch.cat(out)


def train_cer(corpus: Corpus | CorpusManifest, config: CerTrainConfig) -> CerResult:
    """Train one attribute model; keeps the epoch with the best validation CCC.

    Epoch 0 is the initialisation, so ``epochs=0`` returns it unchanged.
    """
    config.validate()
    videos = load_videos(corpus) if isinstance(corpus, CorpusManifest) else list(corpus)
    by_id = {seq.video_id: (seq, ann) for seq, ann in videos}
    split = ratio_split(list(by_id), config.ratios, config.split_seed)
    train = _WindowBank([by_id[i] for i in split.train], config.delta, config.attribute)
    val = _WindowBank([by_id[i] for i in (split.val or split.train)], config.delta, config.attribute)

    model = build_cer(videos[0][0].dim, config)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    gen = torch.Generator().manual_seed(config.seed)

    best_ccc = ccc(val.targets.double(), _predict_bank(model, val).double())
    best_state, best_epoch = copy.deepcopy(model.state_dict()), 0
    history = [{"epoch": 0, "train_loss": None, "val_ccc": best_ccc}]
    for epoch in range(1, config.epochs + 1):
        perm = torch.randperm(len(train), generator=gen)
        losses = []
        for lo in range(0, len(perm), config.batch_size):
            rows = perm[lo:lo + config.batch_size]
            if len(rows) < 2:
                continue
            w, y = train.batch(rows)
            _, y_hat = model(w)
            loss = ccc_loss(y, y_hat)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        val_ccc = ccc(val.targets.double(), _predict_bank(model, val).double())
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_ccc": val_ccc})
        log.info("cer[%s] epoch %d loss %.4f val CCC %.4f", config.attribute, epoch, np.mean(losses), val_ccc)
        if val_ccc > best_ccc:
            best_ccc, best_epoch = val_ccc, epoch
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    return CerResult(model, config, split, best_epoch, best_ccc, history)


def evaluate_cer(model: CerNet, videos: Corpus, attribute: str) -> float:
    """CCC over the concatenated per-frame predictions of ``videos``."""
    if not videos:
        raise ValidationError("evaluation split is empty")
    preds, targets = [], []
    for seq, ann in videos:
        preds.append(model.infer(seq)[1].astype(np.float64))
        targets.append(_targets(ann, attribute))
    return ccc(np.concatenate(targets), np.concatenate(preds))


def save_cer(result: CerResult, path: str | os.PathLike) -> None:
    save_checkpoint(path, result.model.state_dict(), result.meta())


def load_cer(path: str | os.PathLike) -> tuple[CerNet, dict]:
    state, meta = load_checkpoint(path)
    if meta.get("kind") != "cer":
        raise ValidationError(f"{path} is not an emotion-model checkpoint")
    arch = meta["arch"]
    model = CerNet(**arch)
    model.load_state_dict(state)
    model.eval()
    return model, meta


def checkpoint_id(path: str | os.PathLike) -> str:
    return f"{Path(path).name}:{file_digest(path)[:16]}"


__all__ = [
    "ATTRIBUTES",
    "CerNet",
    "CerResult",
    "CerTrainConfig",
    "build_cer",
    "build_windows",
    "ccc",
    "ccc_loss",
    "evaluate_cer",
    "load_cer",
    "save_cer",
    "train_cer",
    "window_index",
]
