"""Retrieval-augmented report generation on a synthetic corpus."""

from ._core import (
    CheckpointError,
    Config,
    ConfigError,
    Error,
    MissingArtifactError,
    Pipeline,
    UsageError,
    ValidationError,
    bleu,
    cider,
    config_fingerprint,
    corpus_bleu,
    load_config,
    preset_config,
    roc_auc,
    rouge_l,
    top_k,
    variants,
)

__all__ = [
    "CheckpointError",
    "Config",
    "ConfigError",
    "Error",
    "MissingArtifactError",
    "Pipeline",
    "UsageError",
    "ValidationError",
    "bleu",
    "cider",
    "config_fingerprint",
    "corpus_bleu",
    "load_config",
    "preset_config",
    "roc_auc",
    "rouge_l",
    "top_k",
    "variants",
]
