"""On-disk containers: AVSF feature matrices, annotation JSON, corpus manifests.

AVSF layout (all little-endian)::

    b"AVSF"  u32 version=1  u32 N  u32 D  N*D float32 (row-major)
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from avsum.errors import (
    BadMagicError,
    FormatError,
    NonFiniteError,
    ShapeError,
    TruncatedPayloadError,
    ValidationError,
)

AVSF_MAGIC = b"AVSF"
AVSF_VERSION = 1
_HEADER = struct.Struct("<4sIII")
GOOGLENET_DIM = 1024


@dataclass
class FeatureSequence:
    video_id: str
    data: np.ndarray
    fps: float = 2.0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ShapeError(f"{self.video_id}: feature matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"{self.video_id}: empty feature matrix {data.shape}")
        data = np.ascontiguousarray(data, dtype="<f4")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{self.video_id}: feature matrix contains NaN or Inf")
        self.data = data

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


def write_matrix(data: np.ndarray, path: str | os.PathLike) -> None:
    """Write any 2-D float matrix as AVSF (values are stored as float32)."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ShapeError(f"AVSF holds 2-D matrices, got shape {arr.shape}")
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(AVSF_MAGIC, AVSF_VERSION, arr.shape[0], arr.shape[1]))
            fh.write(arr.tobytes())
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the AVSF header")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != AVSF_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != AVSF_VERSION:
        raise FormatError(f"{path}: unsupported AVSF version {version}")
    expected = n * d * 4
    payload = raw[_HEADER.size:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: header declares {n}x{d} but payload holds {len(payload) // 4} values"
        )
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{path}: payload contains NaN or Inf")
    return arr


def write_feature_file(seq: FeatureSequence, path: str | os.PathLike) -> None:
    write_matrix(seq.data, path)


def read_feature_file(path: str | os.PathLike, video_id: str | None = None, fps: float = 2.0) -> FeatureSequence:
    arr = read_matrix(path)
    return FeatureSequence(video_id or Path(path).stem, arr, fps)


@dataclass
class SummaryAnnotation:
    """Per-frame labels for one video.

    ``affect`` optionally carries frame-level emotion targets keyed by
    attribute name (``"activation"``, ``"valence"``) for emotion-model
    training.
    """

    video_id: str
    key_frames: np.ndarray
    face_flags: np.ndarray
    shot_boundaries: list[int]
    group: str = "0"
    importance: np.ndarray | None = None
    rater_tracks: list[np.ndarray] | None = None
    affect: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        self.key_frames = _binary(self.key_frames, "key_frames", self.video_id)
        n = len(self.key_frames)
        self.face_flags = _binary(self.face_flags, "face_flags", self.video_id)
        if len(self.face_flags) != n:
            raise ShapeError(f"{self.video_id}: face_flags length {len(self.face_flags)} != {n}")
        self.shot_boundaries = [int(b) for b in self.shot_boundaries]
        validate_boundaries(self.shot_boundaries, n)
        self.group = str(self.group)
        if self.importance is not None:
            self.importance = _real(self.importance, n, "importance", self.video_id)
            if np.any((self.importance < 0) | (self.importance > 1)):
                raise ValidationError(f"{self.video_id}: importance outside [0, 1]")
        if self.rater_tracks is not None:
            self.rater_tracks = [_real(t, n, "rater track", self.video_id) for t in self.rater_tracks]
        if self.affect is not None:
            self.affect = {k: _real(v, n, f"affect[{k}]", self.video_id) for k, v in self.affect.items()}

    @property
    def n_frames(self) -> int:
        return len(self.key_frames)

    @property
    def empty_summary(self) -> bool:
        return not self.key_frames.any()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "video_id": self.video_id,
            "n_frames": self.n_frames,
            "key_frames": self.key_frames.tolist(),
            "face_flags": self.face_flags.tolist(),
            "shot_boundaries": list(self.shot_boundaries),
            "group": self.group,
        }
        if self.importance is not None:
            out["importance"] = self.importance.tolist()
        if self.rater_tracks is not None:
            out["rater_tracks"] = [t.tolist() for t in self.rater_tracks]
        if self.affect is not None:
            out["affect"] = {k: v.tolist() for k, v in sorted(self.affect.items())}
        return out

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "SummaryAnnotation":
        try:
            ann = cls(
                video_id=obj["video_id"],
                key_frames=obj["key_frames"],
                face_flags=obj["face_flags"],
                shot_boundaries=obj["shot_boundaries"],
                group=obj.get("group", "0"),
                importance=obj.get("importance"),
                rater_tracks=obj.get("rater_tracks"),
                affect=obj.get("affect"),
            )
        except KeyError as exc:
            raise FormatError(f"annotation missing field {exc}") from exc
        if "n_frames" in obj and obj["n_frames"] != ann.n_frames:
            raise FormatError(f"{ann.video_id}: n_frames={obj['n_frames']} but vectors have length {ann.n_frames}")
        return ann

    def __eq__(self, other):
        if not isinstance(other, SummaryAnnotation):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _binary(values, name, vid) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ShapeError(f"{vid}: {name} must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValidationError(f"{vid}: {name} must be binary")
    return arr.astype(np.int8)


def _real(values, n, name, vid) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise ShapeError(f"{vid}: {name} has shape {arr.shape}, expected ({n},)")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{vid}: {name} contains NaN or Inf")
    return arr


def validate_boundaries(bounds: list[int], n: int) -> None:
    if len(bounds) < 2 or bounds[0] != 0 or bounds[-1] != n:
        raise ValidationError(f"shot boundaries must start at 0 and end at {n}, got {bounds[:3]}...{bounds[-2:]}")
    if any(b >= c for b, c in zip(bounds, bounds[1:])):
        raise ValidationError("shot boundaries must be strictly increasing")


def write_annotation(ann: SummaryAnnotation, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(ann.to_dict()), encoding="utf-8")


def read_annotation(path: str | os.PathLike) -> SummaryAnnotation:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return SummaryAnnotation.from_dict(obj)


@dataclass
class VideoEntry:
    video_id: str
    features: str
    annotation: str
    group: str
    n_frames: int

    def to_dict(self):
        return {
            "id": self.video_id,
            "features": self.features,
            "annotation": self.annotation,
            "group": self.group,
            "n_frames": self.n_frames,
        }


@dataclass
class CorpusManifest:
    corpus_id: str
    videos: list[VideoEntry]
    root: Path = field(default=Path("."), compare=False)
    seed: int | None = None
    generator_params: dict[str, Any] | None = None
    fps: float = 2.0

    def __post_init__(self):
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"manifest {self.corpus_id}: duplicate video ids")

    @property
    def ids(self) -> list[str]:
        return [v.video_id for v in self.videos]

    def entry(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def groups(self) -> dict[str, str]:
        return {v.video_id: v.group for v in self.videos}

    def load_video(self, video_id: str) -> tuple[FeatureSequence, SummaryAnnotation]:
        e = self.entry(video_id)
        seq = read_feature_file(self.root / e.features, video_id=video_id, fps=self.fps)
        ann = read_annotation(self.root / e.annotation)
        if seq.n_frames != ann.n_frames or seq.n_frames != e.n_frames:
            raise ShapeError(
                f"{video_id}: features have {seq.n_frames} frames, annotation {ann.n_frames}, manifest {e.n_frames}"
            )
        return seq, ann

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"corpus_id": self.corpus_id, "fps": self.fps}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.generator_params is not None:
            out["generator_params"] = self.generator_params
        out["videos"] = [v.to_dict() for v in self.videos]
        return out


def write_manifest(manifest: CorpusManifest, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=1, sort_keys=True), encoding="utf-8")


def read_manifest(path: str | os.PathLike, validate: bool = True) -> CorpusManifest:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    try:
        videos = [
            VideoEntry(v["id"], v["features"], v["annotation"], str(v.get("group", "0")), int(v["n_frames"]))
            for v in obj["videos"]
        ]
        manifest = CorpusManifest(
            corpus_id=obj["corpus_id"],
            videos=videos,
            root=path.parent,
            seed=obj.get("seed"),
            generator_params=obj.get("generator_params"),
            fps=float(obj.get("fps", 2.0)),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: manifest missing field {exc}") from exc
    if validate:
        for v in manifest.videos:
            for rel in (v.features, v.annotation):
                if not (manifest.root / rel).exists():
                    raise ValidationError(f"{path}: referenced file {rel} does not exist")
            with open(manifest.root / v.features, "rb") as fh:
                head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise TruncatedPayloadError(f"{v.features}: file shorter than the AVSF header")
            magic, _, n, _ = _HEADER.unpack(head)
            if magic != AVSF_MAGIC:
                raise BadMagicError(f"{v.features}: bad magic {magic!r}")
            if n != v.n_frames:
                raise ShapeError(f"{v.features}: header declares {n} frames, manifest says {v.n_frames}")
    return manifest
