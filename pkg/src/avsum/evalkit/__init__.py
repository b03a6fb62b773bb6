from avsum.evalkit.keyshots import importance_to_keyshots, knapsack
from avsum.evalkit.metrics import face_recall, multi_rater_f1, precision_recall_f1
from avsum.evalkit.report import (
    DatasetReport,
    DeltaF1,
    VideoScore,
    delta_f1,
    render_table,
    score_video,
    top_l_scores,
)

__all__ = [
    "DatasetReport",
    "DeltaF1",
    "VideoScore",
    "delta_f1",
    "face_recall",
    "importance_to_keyshots",
    "knapsack",
    "multi_rater_f1",
    "precision_recall_f1",
    "render_table",
    "score_video",
    "top_l_scores",
]
