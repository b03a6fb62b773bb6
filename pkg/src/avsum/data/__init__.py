from avsum.data.folds import Fold, FoldPlan, make_folds, ratio_split
from avsum.data.formats import (
    CorpusManifest,
    FeatureSequence,
    SummaryAnnotation,
    VideoEntry,
    read_annotation,
    read_feature_file,
    read_manifest,
    read_matrix,
    write_annotation,
    write_feature_file,
    write_manifest,
    write_matrix,
)
from avsum.data.sampling import downsample, downsample_indices, take_annotation, uniform_indices, uniform_sample
from avsum.data.synthetic import SynthParams, generate_synthetic_corpus, synthesize

__all__ = [
    "CorpusManifest",
    "FeatureSequence",
    "Fold",
    "FoldPlan",
    "SummaryAnnotation",
    "SynthParams",
    "VideoEntry",
    "downsample",
    "downsample_indices",
    "generate_synthetic_corpus",
    "make_folds",
    "ratio_split",
    "read_annotation",
    "read_feature_file",
    "read_manifest",
    "read_matrix",
    "synthesize",
    "take_annotation",
    "uniform_indices",
    "uniform_sample",
    "write_annotation",
    "write_feature_file",
    "write_manifest",
    "write_matrix",
]
