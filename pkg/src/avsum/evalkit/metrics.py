"""Frame-level summary metrics."""

from __future__ import annotations

import logging

import numpy as np

from avsum.errors import ShapeError, ValidationError

log = logging.getLogger(__name__)


def _pair(s, s_hat):
    s = np.asarray(s).astype(np.int64).ravel()
    s_hat = np.asarray(s_hat).astype(np.int64).ravel()
    if s.shape != s_hat.shape:
        raise ShapeError(f"summary lengths differ: {s.size} vs {s_hat.size}")
    return s, s_hat


def precision_recall_f1(s, s_hat) -> tuple[float, float, float]:
    """Precision, recall and F1 of predicted summary ``s_hat`` against ``s``.

    Empty prediction gives P = 0, empty ground truth gives R = 0 and
    P + R = 0 gives F1 = 0.
    """
    s, s_hat = _pair(s, s_hat)
    hits = int(s @ s_hat)
    n_pred, n_true = int(s_hat.sum()), int(s.sum())
    p = hits / n_pred if n_pred else 0.0
    r = hits / n_true if n_true else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def face_recall(s, s_hat, face_flags) -> float:
    """Share of ground-truth summary frames that are face frames and were selected."""
    s, s_hat = _pair(s, s_hat)
    d = np.asarray(face_flags).astype(np.int64).ravel()
    if d.shape != s.shape:
        raise ShapeError(f"face flags length {d.size} != summary length {s.size}")
    n_true = int(s.sum())
    if n_true == 0:
        log.warning("face recall undefined for an empty ground-truth summary; using 0")
        return 0.0
    return int(s_hat @ (d * s)) / n_true


def multi_rater_f1(s_hat, rater_summaries, mode: str = "mean") -> float:
    """F1 against each rater's summary, aggregated by mean or max."""
    if not len(rater_summaries):
        raise ValidationError("need at least one rater summary")
    scores = [precision_recall_f1(r, s_hat)[2] for r in rater_summaries]
    if mode == "mean":
        return float(np.mean(scores))
    if mode == "max":
        return float(np.max(scores))
    raise ValidationError(f"mode must be 'mean' or 'max', got {mode!r}")
