"""Entropy-based anomaly detection for system logs.

Logs are masked and tokenized, cut into fixed-size byte windows and scored
against an n-gram model of normal operation; windows whose entropy stands out
from their neighbors are flagged.
"""
from __future__ import annotations

from .detect import DetectionReport, HampelConfig, evaluate, hampel_flag, merge_regions
from .ingest import DEFAULT_RULES, LogRecord, LogWindow, MaskRule, mask, read_corpus, record_tokens, window
from .ngram import NGramModel, SplitPlan, UnseenEventError, char_entropy, load_model, save_model, sequence_entropy, train
from .timeline import EntropyTimeline, TimelinePoint, score_timeline

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RULES",
    "DetectionReport",
    "EntropyTimeline",
    "HampelConfig",
    "LogRecord",
    "LogWindow",
    "MaskRule",
    "NGramModel",
    "SplitPlan",
    "TimelinePoint",
    "UnseenEventError",
    "char_entropy",
    "evaluate",
    "hampel_flag",
    "load_model",
    "mask",
    "merge_regions",
    "read_corpus",
    "record_tokens",
    "save_model",
    "score_timeline",
    "sequence_entropy",
    "train",
    "window",
]
