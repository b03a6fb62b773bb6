"""Seeded synthetic corpus with planted summary and affect structure.

Every video gets

* smooth latent activation/valence tracks in (-1, 1): Gaussian-smoothed
  white noise, standardised, squashed with tanh;
* a shot partition with random shot lengths; random key shots are picked
  until the key-frame fraction reaches ``key_density``;
* optionally, key shots are emotional highlights: ``key_affect_boost`` is
  added (before squashing) to the standardised activation on key frames;
* features = isotropic unit noise + ``sep`` * key direction on key frames
  + ``affect_sep`` * (activation * u_A + valence * u_V);
* face flags from thresholding a noisy copy of the affect magnitude at a
  fixed quantile; the noise level is calibrated per video so that
  corr(face, |affect|) matches ``face_corr`` where a binary split can.

The three planted directions depend only on ``basis_seed``, so corpora drawn
with different seeds share one feature geometry (an emotion model trained on
one transfers to another). Each video draws from its own
``default_rng([seed, index])`` stream.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from avsum.data.formats import (
    CorpusManifest,
    FeatureSequence,
    SummaryAnnotation,
    VideoEntry,
    write_annotation,
    write_feature_file,
    write_manifest,
)
from avsum.errors import ValidationError


@dataclass(frozen=True)
class SynthParams:
    n_videos: int = 20
    n_frames: int = 320
    dim: int = 64
    smoothness: float = 8.0         # Gaussian sigma (frames) of the latent affect
    key_density: float = 0.15       # target fraction of key frames
    sep: float = 2.0                # key-direction amplitude on key frames
    affect_sep: float | None = None  # affect amplitude in features; None -> sep
    face_corr: float = 0.5
    face_fraction: float = 0.5
    key_affect_boost: float = 0.0
    n_groups: int = 5
    shot_min: int = 8
    shot_max: int = 24
    n_raters: int = 3
    basis_seed: int = 0

    def validate(self) -> None:
        checks = [
            (self.n_videos >= 1, "n_videos >= 1"),
            (self.n_frames >= self.shot_min, "n_frames >= shot_min"),
            (self.dim >= 3, "dim >= 3"),
            (self.smoothness > 0, "smoothness > 0"),
            (0 < self.key_density < 1, "0 < key_density < 1"),
            (self.sep >= 0, "sep >= 0"),
            (self.affect_sep is None or self.affect_sep >= 0, "affect_sep >= 0"),
            (0 <= self.face_corr <= 1, "0 <= face_corr <= 1"),
            (0 < self.face_fraction < 1, "0 < face_fraction < 1"),
            (self.key_affect_boost >= 0, "key_affect_boost >= 0"),
            (1 <= self.n_groups <= self.n_videos, "1 <= n_groups <= n_videos"),
            (1 <= self.shot_min <= self.shot_max, "1 <= shot_min <= shot_max"),
            (self.n_raters >= 0, "n_raters >= 0"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise ValidationError("invalid synthetic parameters: " + ", ".join(bad))

    @property
    def affect_amplitude(self) -> float:
        return self.sep if self.affect_sep is None else self.affect_sep


def planted_basis(dim: int, basis_seed: int) -> np.ndarray:
    """Orthonormal rows (key, activation, valence) in feature space."""
    rng = np.random.default_rng([basis_seed, 7919])
    q, _ = np.linalg.qr(rng.standard_normal((dim, 3)))
    return q.T.copy()


def _smooth_noise(rng, n, sigma):
    x = gaussian_filter1d(rng.standard_normal(n), sigma, mode="nearest")
    return (x - x.mean()) / (x.std() + 1e-12)


def _shots(rng, n, lo, hi):
    bounds = [0]
    while n - bounds[-1] > hi:
        bounds.append(bounds[-1] + int(rng.integers(lo, hi + 1)))
    if n - bounds[-1] < lo and len(bounds) > 1:
        bounds.pop()
    bounds.append(n)
    return bounds


def _pick_key_shots(rng, bounds, density, n):
    n_shots = len(bounds) - 1
    lengths = np.diff(bounds)
    score = rng.random(n_shots)
    budget = int(round(density * n))
    z = np.zeros(n, dtype=np.int8)
    used = 0
    for s in np.argsort(-score, kind="stable"):
        if used + lengths[s] <= budget:
            z[bounds[s]:bounds[s + 1]] = 1
            used += lengths[s]
    return z


def _face_flags(magnitude: np.ndarray, c: float, fraction: float, noise: np.ndarray) -> np.ndarray:
    """Threshold ``a * z(magnitude) + sqrt(1 - a^2) * noise`` at the (1 - fraction) quantile.

    The mixing weight ``a`` is found by bisection so that the point-biserial
    correlation between the flags and ``magnitude`` is as close to ``c`` as
    thresholding allows. Targets above the noise-free correlation (about 0.8
    for a median split) saturate at ``a = 1``.
    """
    z = (magnitude - magnitude.mean()) / (magnitude.std() + 1e-12)

    def flags(a):
        score = a * z + math.sqrt(max(1.0 - a * a, 0.0)) * noise
        return (score > np.quantile(score, 1.0 - fraction)).astype(np.int8)

    def corr(a):
        f = flags(a)
        return 0.0 if f.min() == f.max() else float(np.corrcoef(f, magnitude)[0, 1])

    if c <= 0.0:
        return flags(0.0)
    if corr(1.0) <= c:
        return flags(1.0)
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if corr(mid) < c:
            lo = mid
        else:
            hi = mid
    return flags(hi)


def synthesize_video(params: SynthParams, seed: int, index: int, basis: np.ndarray | None = None):
    if basis is None:
        basis = planted_basis(params.dim, params.basis_seed)
    rng = np.random.default_rng([seed, index])
    n = params.n_frames
    act_raw = _smooth_noise(rng, n, params.smoothness)
    valence = np.tanh(0.8 * _smooth_noise(rng, n, params.smoothness))
    bounds = _shots(rng, n, params.shot_min, params.shot_max)
    z = _pick_key_shots(rng, bounds, params.key_density, n)
    if params.key_affect_boost:
        act_raw = act_raw + params.key_affect_boost * gaussian_filter1d(z.astype(float), 1.5, mode="nearest")
    activation = np.tanh(0.8 * act_raw)
    magnitude = np.hypot(activation, valence)

    feats = rng.standard_normal((n, params.dim))
    feats += params.sep * z[:, None] * basis[0]
    feats += params.affect_amplitude * (activation[:, None] * basis[1] + valence[:, None] * basis[2])

    face = _face_flags(magnitude, params.face_corr, params.face_fraction, rng.standard_normal(n))

    importance = np.clip(0.75 * gaussian_filter1d(z.astype(float), 2.0) + 0.25 * rng.random(n), 0.0, 1.0)
    raters = [np.clip(importance + 0.1 * rng.standard_normal(n), 0.0, 1.0) for _ in range(params.n_raters)]

    vid = f"vid{index:03d}"
    seq = FeatureSequence(vid, feats)
    ann = SummaryAnnotation(
        video_id=vid,
        key_frames=z,
        face_flags=face,
        shot_boundaries=bounds,
        group=str(index % params.n_groups),
        importance=importance,
        rater_tracks=raters or None,
        affect={"activation": activation, "valence": valence},
    )
    return seq, ann


def synthesize(params: SynthParams, seed: int) -> list[tuple[FeatureSequence, SummaryAnnotation]]:
    params.validate()
    basis = planted_basis(params.dim, params.basis_seed)
    return [synthesize_video(params, seed, i, basis) for i in range(params.n_videos)]


def generate_synthetic_corpus(params: SynthParams, seed: int, out_dir: str | Path) -> CorpusManifest:
    """Write a synthetic corpus (features, annotations, manifest.json) under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)
    entries = []
    for seq, ann in synthesize(params, seed):
        feat_rel = f"features/{seq.video_id}.avsf"
        ann_rel = f"annotations/{seq.video_id}.json"
        write_feature_file(seq, out_dir / feat_rel)
        write_annotation(ann, out_dir / ann_rel)
        entries.append(VideoEntry(seq.video_id, feat_rel, ann_rel, ann.group, seq.n_frames))
    manifest = CorpusManifest(
        corpus_id=f"synthetic-{seed}",
        videos=entries,
        root=out_dir,
        seed=seed,
        generator_params=asdict(params),
    )
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest
