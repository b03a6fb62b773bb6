"""Frame-rate reduction and fixed-length resampling.

Both operations reduce to choosing an index set; annotations and affect
tracks are carried along with :func:`take_annotation` / plain fancy indexing
so labels stay aligned with the frames they describe.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from avsum.data.formats import FeatureSequence, SummaryAnnotation
from avsum.errors import ValidationError


def downsample_indices(n_frames: int, source_fps: float, target_fps: float) -> np.ndarray:
    if target_fps <= 0:
        raise ValidationError(f"target_fps must be positive, got {target_fps}")
    if source_fps <= 0:
        raise ValidationError(f"source_fps must be positive, got {source_fps}")
    if target_fps > source_fps:
        raise ValidationError(f"target_fps {target_fps} exceeds source_fps {source_fps}")
    stride = Fraction(source_fps) / Fraction(target_fps)
    out = []
    k = 0
    while True:
        idx = (k * stride.numerator) // stride.denominator
        if idx >= n_frames:
            break
        out.append(idx)
        k += 1
    return np.asarray(out, dtype=np.int64)


def downsample(seq: FeatureSequence, source_fps: float, target_fps: float) -> FeatureSequence:
    """Keep frames ``floor(k * source_fps / target_fps)`` for k = 0, 1, ..."""
    idx = downsample_indices(seq.n_frames, source_fps, target_fps)
    return FeatureSequence(seq.video_id, seq.data[idx], fps=target_fps)


def uniform_indices(n_frames: int, target_len: int, mode: str = "endpoint") -> np.ndarray:
    """Indices for resampling ``n_frames`` frames to exactly ``target_len``.

    ``endpoint`` (default): ``round(j * (n - 1) / (N - 1))`` with halves
    rounded up, so the first and last frame are always kept.
    ``partition``: ``floor(j * n / N)``, i.e. the start of each of N equal
    cells; every source frame repeats equally often when ``n`` divides ``N``.
    """
    if target_len < 2:
        raise ValidationError(f"target length must be >= 2, got {target_len}")
    if n_frames < 1:
        raise ValidationError("cannot resample an empty sequence")
    j = np.arange(target_len, dtype=np.int64)
    if mode == "endpoint":
        num = 2 * j * (n_frames - 1) + (target_len - 1)
        return num // (2 * (target_len - 1))
    if mode == "partition":
        return (j * n_frames) // target_len
    raise ValidationError(f"unknown sampling mode {mode!r}")


def remap_boundaries(bounds: list[int], idx: np.ndarray) -> list[int]:
    """Shot boundaries after keeping frames ``idx`` (non-decreasing)."""
    n_out = len(idx)
    new = [int(np.searchsorted(idx, b, side="left")) for b in bounds[:-1]]
    new.append(n_out)
    new[0] = 0
    out = [new[0]]
    for b in new[1:]:
        if b > out[-1]:
            out.append(b)
    return out


def take_annotation(ann: SummaryAnnotation, idx: np.ndarray) -> SummaryAnnotation:
    return SummaryAnnotation(
        video_id=ann.video_id,
        key_frames=ann.key_frames[idx],
        face_flags=ann.face_flags[idx],
        shot_boundaries=remap_boundaries(ann.shot_boundaries, idx),
        group=ann.group,
        importance=None if ann.importance is None else ann.importance[idx],
        rater_tracks=None if ann.rater_tracks is None else [t[idx] for t in ann.rater_tracks],
        affect=None if ann.affect is None else {k: v[idx] for k, v in ann.affect.items()},
    )


def uniform_sample(
    seq: FeatureSequence,
    annotation: SummaryAnnotation | None,
    target_len: int = 320,
    mode: str = "endpoint",
) -> tuple[FeatureSequence, SummaryAnnotation | None]:
    """Resample a video to ``target_len`` frames; short videos repeat frames."""
    idx = uniform_indices(seq.n_frames, target_len, mode)
    out_seq = FeatureSequence(seq.video_id, seq.data[idx], seq.fps)
    out_ann = None
    if annotation is not None:
        if annotation.n_frames != seq.n_frames:
            raise ValidationError(
                f"{seq.video_id}: annotation has {annotation.n_frames} frames, features {seq.n_frames}"
            )
        out_ann = take_annotation(annotation, idx)
    return out_seq, out_ann
