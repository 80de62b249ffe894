"""Datasets, experiment configuration, the training loop and the CLI."""

from .data import (
    DataFormatError,
    Dataset,
    EmptyDatasetError,
    align_labels,
    load_tsv,
    load_uiuc,
    load_uiuc_file,
    split,
    write_tsv,
)
from .run import (
    ConfigError,
    CurvePoint,
    DivergedError,
    LearningCurve,
    RunConfig,
    build_encoder,
    compare_table,
    config_to_text,
    emit_curve,
    evaluate,
    load_curve,
    parse_config_text,
    read_config_file,
    train_run,
)
from .synth import corpus_tokens, make_synthetic, write_embeddings_file

__all__ = [
    "DataFormatError", "Dataset", "EmptyDatasetError", "align_labels",
    "load_tsv", "load_uiuc", "load_uiuc_file", "split", "write_tsv",
    "ConfigError", "CurvePoint", "DivergedError", "LearningCurve", "RunConfig",
    "build_encoder", "compare_table", "config_to_text", "emit_curve",
    "evaluate", "load_curve", "parse_config_text", "read_config_file",
    "train_run",
    "corpus_tokens", "make_synthetic", "write_embeddings_file",
]
