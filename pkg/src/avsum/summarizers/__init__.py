from avsum.summarizers.loss import class_weights, weighted_bce
from avsum.summarizers.models import (
    AFFECT_KIND,
    VARIANTS,
    Summarizer,
    SummarizerSpec,
    SummaryOutput,
    build_summarizer,
    decide,
    predict,
    reduced_spec,
)
from avsum.summarizers.train import (
    CRITERIA,
    PreparedVideo,
    SummarizerRun,
    TrainRunConfig,
    evaluate_run_dir,
    load_summarizer,
    prepare_corpus,
    prepare_video,
    train_fold,
    train_summarizer,
)

__all__ = [
    "AFFECT_KIND",
    "CRITERIA",
    "PreparedVideo",
    "Summarizer",
    "SummarizerRun",
    "SummarizerSpec",
    "SummaryOutput",
    "TrainRunConfig",
    "VARIANTS",
    "build_summarizer",
    "class_weights",
    "decide",
    "evaluate_run_dir",
    "load_summarizer",
    "predict",
    "prepare_corpus",
    "prepare_video",
    "reduced_spec",
    "train_fold",
    "train_summarizer",
    "weighted_bce",
]
