"""Affective representations from two frozen emotion models.

Per frame j: attributes ``[y_A, y_V]`` and embeddings ``[g_A ; g_V]``
(activation first). ``fuse`` appends either block to the visual features;
``kld_face_analysis`` measures how differently each affective dimension
is distributed on face and non-face frames.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from avsum.cer import CerNet
from avsum.data.formats import FeatureSequence, read_matrix, write_matrix
from avsum.errors import ShapeError, ValidationError


@dataclass
class AffectTrack:
    video_id: str
    attributes: np.ndarray   # (N, 2): activation, valence estimates
    embeddings: np.ndarray   # (N, 2G): activation embedding, then valence
    provenance: tuple[str, str] = ("", "")

    def __post_init__(self):
        self.attributes = np.ascontiguousarray(self.attributes, dtype=np.float32)
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        if self.attributes.ndim != 2 or self.attributes.shape[1] != 2:
            raise ShapeError(f"{self.video_id}: attributes must be (N, 2), got {self.attributes.shape}")
        if self.embeddings.ndim != 2 or len(self.embeddings) != len(self.attributes) or self.embeddings.shape[1] % 2:
            raise ShapeError(f"{self.video_id}: embeddings must be (N, 2G), got {self.embeddings.shape}")
        if not (np.all(np.isfinite(self.attributes)) and np.all(np.isfinite(self.embeddings))):
            raise ValidationError(f"{self.video_id}: affect track contains NaN or Inf")

    @property
    def n_frames(self) -> int:
        return len(self.attributes)

    @property
    def hidden(self) -> int:
        return self.embeddings.shape[1] // 2

    def take(self, idx: np.ndarray) -> "AffectTrack":
        return AffectTrack(self.video_id, self.attributes[idx], self.embeddings[idx], self.provenance)

    def dimensions(self) -> np.ndarray:
        """(N, 2 + 2G) matrix: y_A, y_V, g_1 .. g_2G."""
        return np.concatenate([self.attributes, self.embeddings], axis=1)


def extract_affect(seq: FeatureSequence, model_a: CerNet, model_v: CerNet,
                   provenance: tuple[str, str] = ("", "")) -> AffectTrack:
    for name, m in (("activation", model_a), ("valence", model_v)):
        if m.arch["dim"] != seq.dim:
            raise ShapeError(f"{name} model expects dim {m.arch['dim']}, features have {seq.dim}")
    if model_a.hidden != model_v.hidden:
        raise ShapeError("activation and valence models have different embedding sizes")
    g_a, y_a = model_a.infer(seq)
    g_v, y_v = model_v.infer(seq)
    return AffectTrack(seq.video_id, np.stack([y_a, y_v], axis=1), np.concatenate([g_a, g_v], axis=1), provenance)


FUSION_KINDS = ("GRU", "AV")


def fuse(seq: FeatureSequence | np.ndarray, track: AffectTrack, kind: str) -> np.ndarray:
    """Row-wise ``[visual | affect]``; width D + 2G for ``GRU``, D + 2 for ``AV``."""
    v = seq.data if isinstance(seq, FeatureSequence) else np.asarray(seq, dtype=np.float32)
    if kind == "GRU":
        block = track.embeddings
    elif kind == "AV":
        block = track.attributes
    else:
        raise ValidationError(f"fusion kind must be one of {FUSION_KINDS}, got {kind!r}")
    if len(v) != len(block):
        raise ShapeError(f"fuse: {len(v)} visual frames vs {len(block)} affect frames")
    return np.concatenate([v, block], axis=1)


def save_affect(track: AffectTrack, out_dir: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(track.attributes, out_dir / f"{track.video_id}.av.avsf")
    write_matrix(track.embeddings, out_dir / f"{track.video_id}.gru.avsf")
    sidecar = {"video_id": track.video_id, "activation_ckpt": track.provenance[0],
               "valence_ckpt": track.provenance[1], "n_frames": track.n_frames, "hidden": track.hidden}
    (out_dir / f"{track.video_id}.affect.json").write_text(json.dumps(sidecar, sort_keys=True), encoding="utf-8")


def load_affect(out_dir: str | os.PathLike, video_id: str) -> AffectTrack:
    out_dir = Path(out_dir)
    side = out_dir / f"{video_id}.affect.json"
    if not side.exists():
        raise ValidationError(f"no affect track for {video_id} under {out_dir}; run extract-affect first")
    meta = json.loads(side.read_text(encoding="utf-8"))
    return AffectTrack(
        video_id,
        read_matrix(out_dir / f"{video_id}.av.avsf"),
        read_matrix(out_dir / f"{video_id}.gru.avsf"),
        (meta["activation_ckpt"], meta["valence_ckpt"]),
    )


def kl_divergence(p, q) -> float:
    """sum p log(p / q) in nats; terms with p = 0 contribute 0."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def smoothed_histograms(face_vals, other_vals, bins: int = 32, eps: float = 1e-6):
    lo = min(face_vals.min(), other_vals.min())
    hi = max(face_vals.max(), other_vals.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hp = np.histogram(face_vals, edges)[0].astype(np.float64)
    hq = np.histogram(other_vals, edges)[0].astype(np.float64)
    p = hp / hp.sum() + eps
    q = hq / hq.sum() + eps
    return p / p.sum(), q / q.sum()


def dimension_labels(hidden: int) -> list[str]:
    return ["f_A", "f_V"] + [f"g_A{i + 1}" for i in range(hidden)] + [f"g_V{i + 1}" for i in range(hidden)]


def kld_face_analysis(tracks: list[AffectTrack], face_flags: list[np.ndarray],
                      bins: int = 32, eps: float = 1e-6) -> np.ndarray:
    """D(P_f || Q_f) for every affective dimension, pooled over all videos.

    P_f is the histogram of dimension f over face frames, Q_f over the rest;
    both share ``bins`` equal-width bins over the pooled range and get
    additive smoothing ``eps`` before renormalising.
    """
    if len(tracks) != len(face_flags) or not tracks:
        raise ValidationError("need one face-flag vector per affect track")
    dims, faces = [], []
    for t, f in zip(tracks, face_flags):
        f = np.asarray(f).astype(bool)
        if len(f) != t.n_frames:
            raise ShapeError(f"{t.video_id}: {len(f)} face flags for {t.n_frames} frames")
        dims.append(t.dimensions())
        faces.append(f)
    x = np.concatenate(dims).astype(np.float64)
    face = np.concatenate(faces)
    n_face, n_other = int(face.sum()), int((~face).sum())
    if n_face == 0 or n_other == 0:
        raise ValidationError("KLD analysis needs both face and non-face frames")
    if min(n_face, n_other) < 2 * bins:
        raise ValidationError(f"need at least {2 * bins} frames per class, got {n_face} face / {n_other} non-face")
    out = np.empty(x.shape[1])
    for d in range(x.shape[1]):
        p, q = smoothed_histograms(x[face, d], x[~face, d], bins, eps)
        out[d] = kl_divergence(p, q)
    return out
