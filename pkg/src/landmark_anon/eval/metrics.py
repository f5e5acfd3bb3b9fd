"""Distance and classification metrics used by the evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import InvalidArgumentError, UndefinedDistanceError

REIDENTIFICATION_THRESHOLD = 0.3
PRESENCE_THRESHOLD = 0.5


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("embedding has non-finite entries")
        object.__setattr__(self, "vector", v)


@dataclass(frozen=True)
class ClassProbabilities:
    """Per-class probabilities; ``multilabel`` drops the sum-to-one check."""

    probs: Mapping[str, float]
    multilabel: bool = False

    def __post_init__(self):
        vals = np.array(list(self.probs.values()), dtype=np.float64)
        if vals.size and (np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals))):
            raise InvalidArgumentError("probabilities must lie in [0, 1]")
        if not self.multilabel and abs(vals.sum() - 1.0) > 1e-6:
            raise InvalidArgumentError(f"class probabilities sum to {vals.sum()}, expected 1")
        object.__setattr__(self, "probs", dict(self.probs))

    def __getitem__(self, label: str) -> float:
        return self.probs[label]

    def __contains__(self, label: str) -> bool:
        return label in self.probs


def cosine_distance(a, b) -> float:
    """1 - cos(angle) between two embeddings, in [0, 2]."""
    a = a.vector if isinstance(a, Embedding) else np.asarray(a, dtype=np.float64).ravel()
    b = b.vector if isinstance(b, Embedding) else np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidArgumentError(f"embedding lengths differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise UndefinedDistanceError("cosine distance is undefined for a zero vector")
    if np.array_equal(a, b):
        return 0.0
    cos = float(np.dot(a, b) / (na * nb))
    return float(min(2.0, max(0.0, 1.0 - cos)))


def class_prob_distance(orig, anon, label: str) -> float:
    """Absolute change of one class's probability."""
    if label not in orig or label not in anon:
        raise InvalidArgumentError(f"label {label!r} missing from probabilities")
    return abs(float(orig[label]) - float(anon[label]))


def f1_report(y_true: Sequence, y_pred: Sequence, labels: Sequence) -> dict:
    """Per-class precision/recall/F1 with accuracy and macro/weighted averages.

    Undefined ratios (no predictions or no support for a class) are reported
    as 0 and listed under ``zero_division``.
    """
    if len(y_true) != len(y_pred):
        raise InvalidArgumentError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    labels = list(labels)
    observed = set(y_true) | set(y_pred)
    if not observed <= set(labels):
        raise InvalidArgumentError(f"labels do not cover {sorted(map(str, observed - set(labels)))}")
    per_class = {}
    zero_division = []
    for c in labels:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        if tp + fp:
            precision = tp / (tp + fp)
        else:
            precision = 0.0
            zero_division.append((c, "precision"))
        if tp + fn:
            recall = tp / (tp + fn)
        else:
            recall = 0.0
            zero_division.append((c, "recall"))
        if precision + recall:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
            zero_division.append((c, "f1"))
        per_class[c] = {"precision": precision, "recall": recall, "f1": f1, "support": tp + fn}
    n = len(y_true)
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / n if n else 0.0
    k = len(labels)
    total_support = sum(m["support"] for m in per_class.values())
    macro = {
        key: sum(m[key] for m in per_class.values()) / k if k else 0.0
        for key in ("precision", "recall", "f1")
    }
    weighted = {
        key: (
            sum(m[key] * m["support"] for m in per_class.values()) / total_support
            if total_support
            else 0.0
        )
        for key in ("precision", "recall", "f1")
    }
    macro["support"] = weighted["support"] = total_support
    return {
        "per_class": per_class,
        "accuracy": accuracy,
        "macro avg": macro,
        "weighted avg": weighted,
        "zero_division": zero_division,
    }


def _prob_matrix(probs, traits) -> np.ndarray:
    if isinstance(probs, np.ndarray):
        return np.asarray(probs, dtype=np.float64)
    return np.array([[float(p[t]) for t in traits] for p in probs], dtype=np.float64)


def trait_removal_counts(orig_probs, anon_probs, traits: Sequence[str]) -> dict[str, tuple[int, int]]:
    """Per trait: (number predicted present in the originals, number of those removed)."""
    o = _prob_matrix(orig_probs, traits)
    a = _prob_matrix(anon_probs, traits)
    if o.shape != a.shape or o.shape[1:] != (len(traits),):
        raise InvalidArgumentError("original and anonymized probabilities are not aligned")
    present = o > PRESENCE_THRESHOLD
    removed = present & (a <= PRESENCE_THRESHOLD)
    return {
        t: (int(present[:, j].sum()), int(removed[:, j].sum())) for j, t in enumerate(traits)
    }


def trait_removal_rates(orig_probs, anon_probs, traits: Sequence[str]) -> dict[str, float | None]:
    """Fraction of trait-positive originals whose anonymized version loses the trait.

    A trait counts as present when its probability is strictly above 0.5.
    Traits never present in the originals map to ``None`` (not applicable).
    """
    counts = trait_removal_counts(orig_probs, anon_probs, traits)
    return {t: (removed / present if present else None) for t, (present, removed) in counts.items()}
