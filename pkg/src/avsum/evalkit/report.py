"""Per-video scores, dataset aggregates, Top-L and cumulative-gain views."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from avsum.errors import ValidationError
from avsum.evalkit.metrics import face_recall, precision_recall_f1

log = logging.getLogger(__name__)


@dataclass
class VideoScore:
    video_id: str
    precision: float
    recall: float
    f1: float
    face_recall: float
    face_frames: int  # face frames inside the ground-truth summary
    empty_truth: bool = False


def score_video(video_id: str, s, s_hat, face_flags) -> VideoScore:
    p, r, f1 = precision_recall_f1(s, s_hat)
    s = np.asarray(s).astype(np.int64)
    d = np.asarray(face_flags).astype(np.int64)
    return VideoScore(video_id, p, r, f1, face_recall(s, s_hat, d), int(d @ s), not s.any())


@dataclass
class DatasetReport:
    videos: list[VideoScore]
    model: str = ""
    criterion: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise ValidationError("report holds duplicate video ids")

    @property
    def f1(self) -> float:
        return float(np.mean([v.f1 for v in self.videos]))

    @property
    def face_recall(self) -> float:
        return float(np.mean([v.face_recall for v in self.videos]))

    def by_id(self) -> dict[str, VideoScore]:
        return {v.video_id: v for v in self.videos}

    def ranked(self) -> list[VideoScore]:
        """Videos by face frames in the ground-truth summary, descending; ties by id."""
        return sorted(self.videos, key=lambda v: (-v.face_frames, v.video_id))

    def to_dict(self, top_l: int | None = None) -> dict:
        out = {
            "model": self.model,
            "criterion": self.criterion,
            "provenance": self.provenance,
            "F1": self.f1,
            "R": self.face_recall,
            "videos": [asdict(v) for v in sorted(self.videos, key=lambda v: v.video_id)],
        }
        if top_l is not None:
            f1_l, r_l = top_l_scores(self, top_l)
            out[f"F1_{top_l}"], out[f"R_{top_l}"] = f1_l, r_l
        return out

    def to_json(self, top_l: int | None = None) -> str:
        return json.dumps(self.to_dict(top_l), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, obj) -> "DatasetReport":
        return cls([VideoScore(**v) for v in obj["videos"]], obj.get("model", ""),
                   obj.get("criterion", ""), obj.get("provenance", {}))


def top_l_scores(report: DatasetReport, top_l: int = 15) -> tuple[float, float]:
    """Mean F1 and face recall over the ``top_l`` most face-rich videos."""
    if not 1 <= top_l <= len(report.videos):
        raise ValidationError(f"L must be in [1, {len(report.videos)}], got {top_l}")
    top = report.ranked()[:top_l]
    return float(np.mean([v.f1 for v in top])), float(np.mean([v.face_recall for v in top]))


@dataclass
class DeltaF1:
    order: list[str]            # video ids in ranking order (excluded videos removed)
    per_video: dict[str, float]
    curve: list[float]          # curve[L-1] = cumulative gain over the first L videos
    excluded: list[str]         # baseline F1 = 0, gain undefined


def delta_f1(report: DatasetReport, baseline: DatasetReport) -> DeltaF1:
    """Normalised per-video F1 gain over a baseline and its running sum
    along the face-frame ranking of the evaluated report."""
    mine, base = report.by_id(), baseline.by_id()
    if set(mine) != set(base):
        raise ValidationError("report and baseline cover different videos")
    per_video, order, excluded = {}, [], []
    for v in report.ranked():
        b = base[v.video_id].f1
        if b <= 0:
            excluded.append(v.video_id)
            continue
        per_video[v.video_id] = (v.f1 - b) / b
        order.append(v.video_id)
    if excluded:
        log.warning("excluded %d videos with zero baseline F1 from the gain curve", len(excluded))
    curve = np.cumsum([per_video[i] for i in order]).tolist() if order else []
    return DeltaF1(order, per_video, curve, excluded)


def render_table(rows: dict[str, dict[str, DatasetReport]], top_l: int = 15) -> str:
    """Text grid: model x (F1, F1_L, R, R_L) under MaxF1 and MaxR, in percent."""
    crits = ["MaxF1", "MaxR"]
    cols = ["F1", f"F1_{top_l}", "R", f"R_{top_l}"]
    head = f"{'Model':<14}|" + "|".join(" ".join(f"{c:>7}" for c in cols) + f"  {crit:<5}" for crit in crits)
    lines = [head, "-" * len(head)]
    for model, by_crit in rows.items():
        cells = []
        for crit in crits:
            rep = by_crit.get(crit)
            if rep is None:
                cells.append(" ".join(f"{'-':>7}" for _ in cols) + "       ")
                continue
            f1_l, r_l = top_l_scores(rep, min(top_l, len(rep.videos)))
            vals = [rep.f1, f1_l, rep.face_recall, r_l]
            cells.append(" ".join(f"{100 * v:7.2f}" for v in vals) + "       ")
        lines.append(f"{model:<14}|" + "|".join(cells))
    return "\n".join(lines)
