"""Anonymity, emotion-preservation and trait-removal evaluation."""

from .adapters import (
    ClassifierAdapter,
    EmbedderAdapter,
    PixelStatsEmbedder,
    SyntheticEmotionClassifier,
    SyntheticTraitClassifier,
)
from .metrics import (
    PRESENCE_THRESHOLD,
    REIDENTIFICATION_THRESHOLD,
    ClassProbabilities,
    Embedding,
    class_prob_distance,
    cosine_distance,
    f1_report,
    trait_removal_counts,
    trait_removal_rates,
)
from .reports import (
    MetricsReport,
    PairRecord,
    anonymity_report,
    emotion_inference_report,
    read_pairs_csv,
    trait_report,
    training_f1_report,
    write_pairs_csv,
)

__all__ = [
    "PRESENCE_THRESHOLD",
    "REIDENTIFICATION_THRESHOLD",
    "ClassProbabilities",
    "ClassifierAdapter",
    "EmbedderAdapter",
    "Embedding",
    "MetricsReport",
    "PairRecord",
    "PixelStatsEmbedder",
    "SyntheticEmotionClassifier",
    "SyntheticTraitClassifier",
    "anonymity_report",
    "class_prob_distance",
    "cosine_distance",
    "emotion_inference_report",
    "f1_report",
    "read_pairs_csv",
    "trait_removal_counts",
    "trait_removal_rates",
    "trait_report",
    "training_f1_report",
    "write_pairs_csv",
]
