"""Summarizer training with per-fold MaxF1 / MaxR checkpoint selection.

Emotion models are frozen before this stage: affective variants consume
precomputed :class:`~avsum.affect.AffectTrack` objects only.

After every epoch the fold's test videos are scored; the epoch with the
highest mean F1 and the epoch with the highest mean face recall are kept
separately (earliest epoch on ties). Selecting on the test videos follows
the published protocol and is optimistic; use a held-out group when an
unbiased estimate matters.
"""

from __future__ import annotations

import copy
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch

from avsum.affect import AffectTrack, fuse
from avsum.data.folds import Fold, FoldPlan
from avsum.data.formats import FeatureSequence, SummaryAnnotation
from avsum.data.sampling import uniform_indices, take_annotation
from avsum.errors import ValidationError
from avsum.evalkit.report import DatasetReport, VideoScore, score_video
from avsum.nn.checkpoint import arch_hash, load_checkpoint, save_checkpoint
from avsum.summarizers.loss import weighted_bce
from avsum.summarizers.models import Summarizer, SummarizerSpec, build_summarizer, decide

log = logging.getLogger(__name__)

CRITERIA = ("MaxF1", "MaxR")


@dataclass
class TrainRunConfig:
    epochs: int = 50
    batch_size: int = 5
    lr: float = 1e-3
    n_frames: int = 320
    seed: int = 0
    sampling: str = "endpoint"

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValidationError("epochs and batch_size must be >= 1 and lr > 0")


@dataclass
class PreparedVideo:
    video_id: str
    x: np.ndarray                  # (N, W) fused input
    side: np.ndarray | None        # (N, k) affect block fed to skip/attention heads
    labels: np.ndarray             # (N,) key frames
    face: np.ndarray               # (N,) face flags
    group: str


def prepare_video(seq: FeatureSequence, ann: SummaryAnnotation, kind: str | None,
                  track: AffectTrack | None, n_frames: int, sampling: str = "endpoint") -> PreparedVideo:
    """Resample to ``n_frames`` and fuse the affect block for ``kind``."""
    idx = uniform_indices(seq.n_frames, n_frames, sampling)
    ann = take_annotation(ann, idx)
    v = seq.data[idx]
    side = None
    if kind is not None:
        if track is None:
            raise ValidationError(f"{seq.video_id}: affective variant needs an affect track")
        if track.n_frames != seq.n_frames:
            raise ValidationError(f"{seq.video_id}: affect track has {track.n_frames} frames, video {seq.n_frames}")
        track = track.take(idx)
        x = fuse(v, track, kind)
        side = track.embeddings if kind == "GRU" else track.attributes
    else:
        x = v
    return PreparedVideo(seq.video_id, np.ascontiguousarray(x, dtype=np.float32), side,
                         ann.key_frames.copy(), ann.face_flags.copy(), ann.group)


def prepare_corpus(videos: Sequence[tuple[FeatureSequence, SummaryAnnotation]], spec: SummarizerSpec,
                   tracks: Mapping[str, AffectTrack] | None = None,
                   sampling: str = "endpoint") -> dict[str, PreparedVideo]:
    out = {}
    for seq, ann in videos:
        track = None if tracks is None else tracks.get(seq.video_id)
        out[seq.video_id] = prepare_video(seq, ann, spec.affect_kind, track, spec.n_frames, sampling)
    return out


@dataclass
class Selection:
    criterion: str
    epoch: int
    value: float
    state: dict
    decisions: dict[str, np.ndarray]


@dataclass
class FoldResult:
    fold: Fold
    log: list[dict]
    selections: dict[str, Selection]


def _stack(videos: list[PreparedVideo], dtype):
    x = torch.as_tensor(np.stack([v.x for v in videos]), dtype=dtype)
    side = None if videos[0].side is None else torch.as_tensor(np.stack([v.side for v in videos]), dtype=dtype)
    z = torch.as_tensor(np.stack([v.labels for v in videos]), dtype=dtype)
    return x, side, z


@torch.no_grad()
def predict_decisions(model: Summarizer, videos: list[PreparedVideo]) -> dict[str, np.ndarray]:
    if not videos:
        return {}
    x, side, _ = _stack(videos, next(model.parameters()).dtype)
    probs = torch.softmax(model(x, side), dim=-1).numpy()
    return {v.video_id: decide(p) for v, p in zip(videos, probs)}


def score_decisions(videos: list[PreparedVideo], decisions: dict[str, np.ndarray]) -> list[VideoScore]:
    return [score_video(v.video_id, v.labels, decisions[v.video_id], v.face) for v in videos]


def train_fold(fold: Fold, prepared: Mapping[str, PreparedVideo], spec: SummarizerSpec,
               cfg: TrainRunConfig, fold_index: int = 0, run_dir: str | os.PathLike | None = None) -> FoldResult:
    cfg.validate()
    train = [prepared[i] for i in fold.train]
    test = [prepared[i] for i in fold.test]
    if not train or not test:
        raise ValidationError(f"fold {fold.name} has an empty train or test set")
    model = build_summarizer(spec, cfg.seed)
    dtype = next(model.parameters()).dtype
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed * 1000 + fold_index)
    best: dict[str, Selection] = {}
    history = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        perm = torch.randperm(len(train), generator=gen).tolist()
        losses = []
        for lo in range(0, len(perm), cfg.batch_size):
            batch = [train[i] for i in perm[lo:lo + cfg.batch_size]]
            x, side, z = _stack(batch, dtype)
            probs = torch.softmax(model(x, side), dim=-1)[..., 1]
            loss = weighted_bce(z, probs)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())
        model.eval()
        decisions = predict_decisions(model, test)
        scores = score_decisions(test, decisions)
        f1 = float(np.mean([s.f1 for s in scores]))
        r = float(np.mean([s.face_recall for s in scores]))
        history.append({"epoch": epoch, "loss": float(np.mean(losses)), "f1": f1, "r": r})
        for crit, value in (("MaxF1", f1), ("MaxR", r)):
            if crit not in best or value > best[crit].value:
                best[crit] = Selection(crit, epoch, value, copy.deepcopy(model.state_dict()), decisions)
        log.debug("%s %s epoch %d loss %.4f F1 %.4f R %.4f", spec.variant, fold.name, epoch, history[-1]["loss"], f1, r)
    result = FoldResult(fold, history, best)
    if run_dir is not None:
        write_fold(result, spec, cfg, Path(run_dir) / fold.name)
    return result


def checkpoint_meta(spec: SummarizerSpec, cfg: TrainRunConfig, sel: Selection, fold: Fold) -> dict:
    arch = spec.to_dict()
    return {
        "kind": "summarizer",
        "arch": arch,
        "arch_hash": arch_hash(arch),
        "seed": cfg.seed,
        "epoch": sel.epoch,
        "criterion": sel.criterion,
        "value": sel.value,
        "fold": fold.name,
        "test_ids": fold.test,
    }


def write_fold(result: FoldResult, spec: SummarizerSpec, cfg: TrainRunConfig, fold_dir: Path) -> None:
    fold_dir.mkdir(parents=True, exist_ok=True)
    for crit, sel in result.selections.items():
        save_checkpoint(fold_dir / f"{crit.lower()}.ckpt", sel.state, checkpoint_meta(spec, cfg, sel, result.fold))
    with open(fold_dir / "log.jsonl", "w", encoding="utf-8") as fh:
        for line in result.log:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def load_summarizer(path: str | os.PathLike) -> tuple[Summarizer, dict]:
    state, meta = load_checkpoint(path)
    if meta.get("kind") != "summarizer":
        raise ValidationError(f"{path} is not a summarizer checkpoint")
    model = Summarizer(SummarizerSpec(**meta["arch"]))
    model.load_state_dict(state)
    model.eval()
    return model, meta


@dataclass
class SummarizerRun:
    spec: SummarizerSpec
    config: TrainRunConfig
    folds: list[FoldResult] = field(default_factory=list)

    def report(self, criterion: str, prepared: Mapping[str, PreparedVideo]) -> DatasetReport:
        """Dataset report from each fold's selected epoch on its own test videos."""
        if criterion not in CRITERIA:
            raise ValidationError(f"criterion must be one of {CRITERIA}")
        scores, prov = [], {}
        for fr in self.folds:
            sel = fr.selections[criterion]
            test = [prepared[i] for i in fr.fold.test]
            scores.extend(score_decisions(test, sel.decisions))
            prov[fr.fold.name] = sel.epoch
        return DatasetReport(scores, self.spec.variant, criterion, {"epochs": prov})


def _fold_job(args):
    fold, prepared, spec, cfg, k, run_dir = args
    torch.set_num_threads(1)
    return train_fold(fold, prepared, spec, cfg, k, run_dir)


def train_summarizer(prepared: Mapping[str, PreparedVideo], folds: FoldPlan, spec: SummarizerSpec,
                     cfg: TrainRunConfig, run_dir: str | os.PathLike | None = None, jobs: int = 1) -> SummarizerRun:
    """Train one model per fold; writes ``<run_dir>/<fold>/{maxf1,maxr}.ckpt, log.jsonl``."""
    jobs_args = [(f, {i: prepared[i] for i in f.train + f.test}, spec, cfg, k, run_dir)
                 for k, f in enumerate(folds.folds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fold_job, jobs_args))
    else:
        results = [train_fold(*a) for a in jobs_args]
    run = SummarizerRun(spec, cfg, results)
    if run_dir is not None:
        meta = {"spec": spec.to_dict(), "config": asdict(cfg), "folds": folds.to_dict()}
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        (Path(run_dir) / "run.json").write_text(json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8")
    return run


def evaluate_run_dir(run_dir: str | os.PathLike, prepared: Mapping[str, PreparedVideo], criterion: str) -> DatasetReport:
    """Re-score every fold's saved checkpoint on its own test videos."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    plan = FoldPlan.from_dict(meta["folds"])
    scores, prov = [], {}
    for fold in plan.folds:
        model, ck = load_summarizer(run_dir / fold.name / f"{criterion.lower()}.ckpt")
        test = [prepared[i] for i in fold.test]
        scores.extend(score_decisions(test, predict_decisions(model, test)))
        prov[fold.name] = ck["epoch"]
    return DatasetReport(scores, meta["spec"]["variant"], criterion, {"epochs": prov})
