"""Evaluation reports over lists of (original, anonymized) image pairs."""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import stats
from ..errors import DegenerateSampleError, InvalidArgumentError
from ..io import load_image
from . import references
from .adapters import adapter_id
from .metrics import (
    REIDENTIFICATION_THRESHOLD,
    ClassProbabilities,
    class_prob_distance,
    cosine_distance,
    f1_report,
    trait_removal_counts,
)

log = logging.getLogger(__name__)

PAIR_COLUMNS = ["id", "original_path", "anonymized_path", "method", "label"]


@dataclass(frozen=True)
class PairRecord:
    id: str
    original_path: str
    anonymized_path: str
    method_tag: str
    label: str | None = None


def read_pairs_csv(path: str | Path) -> list[PairRecord]:
    """Read a pair list; relative image paths resolve against the CSV's folder."""
    path = Path(path)
    base = path.parent
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "original_path", "anonymized_path", "method"} - set(reader.fieldnames or [])
        if missing:
            raise InvalidArgumentError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(
                PairRecord(
                    row["id"],
                    str(base / row["original_path"]),
                    str(base / row["anonymized_path"]),
                    row["method"],
                    row.get("label") or None,
                )
            )
    return out


def write_pairs_csv(pairs: Sequence[PairRecord], path: str | Path, relative_to: str | Path | None = None) -> None:
    base = Path(relative_to) if relative_to is not None else Path(path).parent
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PAIR_COLUMNS)
        for p in pairs:
            writer.writerow(
                [
                    p.id,
                    _relpath(p.original_path, base),
                    _relpath(p.anonymized_path, base),
                    p.method_tag,
                    p.label or "",
                ]
            )


def _relpath(p: str, base: Path) -> str:
    try:
        return str(Path(p).resolve().relative_to(base.resolve()))
    except ValueError:
        return str(Path(p).resolve())


@dataclass
class MetricsReport:
    kind: str
    per_pair: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "per_pair": self.per_pair,
            "aggregates": self.aggregates,
            "statistics": self.statistics,
            "metadata": self.metadata,
            "references": self.references,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path, stem: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        json_path = out_dir / f"{stem}.json"
        csv_path = out_dir / f"{stem}.csv"
        json_path.write_text(self.dumps())
        columns = sorted({k for row in self.per_pair for k in row})
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in self.per_pair:
                writer.writerow({k: "" if row.get(k) is None else row.get(k) for k in columns})
        return json_path, csv_path


class _ImageCache:
    """Per-path memo so originals shared by several methods are scored once."""

    def __init__(self, fn):
        self.fn = fn
        self.cache = {}

    def __call__(self, path: str):
        if path not in self.cache:
            self.cache[path] = self.fn(load_image(path))
        return self.cache[path]


def _mean(values):
    return float(np.mean(values)) if values else None


def anonymity_report(
    pairs: Sequence[PairRecord],
    embedder,
    threshold: float = REIDENTIFICATION_THRESHOLD,
    metadata: Mapping | None = None,
) -> MetricsReport:
    """Cosine distance between original and anonymized embeddings, per method.

    A method whose mean distance stays at or below ``threshold`` is flagged
    re-identifiable. Pairs whose images cannot be read or embedded are
    counted as skipped.
    """
    embed = _ImageCache(embedder.embed)
    per_pair = []
    by_method: dict[str, list[float]] = defaultdict(list)
    skipped: dict[str, int] = defaultdict(int)
    for p in pairs:
        row = {"id": p.id, "method": p.method_tag, "distance": None, "error": None}
        try:
            a = embed(p.original_path)
            b = embed(p.anonymized_path)
            if a is None or b is None:
                raise ValueError("no embedding")
            row["distance"] = cosine_distance(a, b)
            by_method[p.method_tag].append(row["distance"])
        except (OSError, ValueError) as exc:
            log.warning("pair %s (%s) skipped: %s", p.id, p.method_tag, exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
            skipped[p.method_tag] += 1
        per_pair.append(row)
    methods = sorted(set(by_method) | set(skipped))
    aggregates = {}
    for m in methods:
        mean = _mean(by_method[m])
        aggregates[m] = {
            "mean_distance": mean,
            "n": len(by_method[m]),
            "skipped": skipped[m],
            "re_identifiable": None if mean is None else mean <= threshold,
        }
    meta = {"adapters": {"embedder": adapter_id(embedder)}, "threshold": threshold, **(metadata or {})}
    return MetricsReport("anonymity", per_pair, aggregates, {}, meta, references.footer("anonymity"))


def _comparison(x: np.ndarray, y: np.ndarray) -> dict:
    n = int(x.size)
    try:
        res = stats.wilcoxon_signed_rank(x, y)
    except DegenerateSampleError:
        return {"p": 1.0, "Z": 0.0, "r": 0.0, "N": n, "n_effective": 0, "W": 0.0,
                "p_exact": None, "degenerate": True}
    return {
        "p": res.p,
        "Z": res.z,
        "r": stats.effect_size_r(res.z, n),
        "N": n,
        "n_effective": res.n_effective,
        "W": res.statistic,
        "p_exact": res.p_exact,
        "degenerate": False,
    }


def _normality(values: np.ndarray) -> float | None:
    if not 3 <= values.size <= 5000:
        return None
    try:
        return stats.shapiro_wilk(values).p
    except DegenerateSampleError:
        return None


def emotion_inference_report(
    pairs: Sequence[PairRecord],
    classifier,
    labels: Sequence[str],
    label_of_pair: Callable[[PairRecord], str | None] | Mapping[str, str] | None = None,
    reference_method: str = "ours",
    subset: str = "all",
    metadata: Mapping | None = None,
) -> MetricsReport:
    """Class-probability distance per emotion and method, with paired tests.

    For every pair and every emotion we take |p_orig(e) - p_anon(e)|. With
    ``subset="all"`` each emotion is averaged over all pairs; with
    ``"labelled"`` only over pairs whose ground truth is that emotion.
    ``reference_method`` is compared against every other method with the
    signed-rank test on images present for both, and p-values are
    Bonferroni-corrected over all comparisons in the report.
    """
    if subset not in ("all", "labelled"):
        raise InvalidArgumentError(f"unknown subset mode {subset!r}")
    if label_of_pair is None:
        truth = lambda p: p.label  # noqa: E731
    elif callable(label_of_pair):
        truth = label_of_pair
    else:
        truth = lambda p: label_of_pair.get(p.id)  # noqa: E731
    predict = _ImageCache(lambda img: ClassProbabilities(classifier.predict(img)))

    per_pair = []
    # method -> emotion -> {pair id: distance}
    dist: dict[str, dict[str, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
    for p in pairs:
        gt = truth(p)
        row = {"id": p.id, "method": p.method_tag, "label": gt, "error": None}
        try:
            po = predict(p.original_path)
            pa = predict(p.anonymized_path)
        except (OSError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            per_pair.append(row)
            continue
        for e in labels:
            d = class_prob_distance(po, pa, e)
            row[f"dist_{e}"] = d
            if subset == "all" or gt == e:
                dist[p.method_tag][e][p.id] = d
        per_pair.append(row)

    methods = sorted(dist)
    aggregates = {
        m: {e: {"mean": _mean(list(dist[m][e].values())), "n": len(dist[m][e])} for e in labels}
        for m in methods
    }
    normality = {
        m: {e: _normality(np.array(list(dist[m][e].values()))) for e in labels} for m in methods
    }
    comparisons = []
    statistics: dict = {}
    for e in labels:
        statistics[e] = {}
        for m in methods:
            if m == reference_method or reference_method not in dist:
                continue
            ids = sorted(set(dist[reference_method][e]) & set(dist[m][e]))
            if not ids:
                continue
            x = np.array([dist[reference_method][e][i] for i in ids])
            y = np.array([dist[m][e][i] for i in ids])
            block = _comparison(x, y)
            statistics[e][f"{reference_method}_vs_{m}"] = block
            comparisons.append(block)
    corrected = stats.bonferroni([c["p"] for c in comparisons])
    for c, pc in zip(comparisons, corrected):
        c["p_corrected"] = pc
        c["flag"] = stats.significance_flags(pc)
    meta = {
        "adapters": {"classifier": adapter_id(classifier)},
        "labels": list(labels),
        "reference_method": reference_method,
        "subset": subset,
        "normality_p": normality,
        **(metadata or {}),
    }
    return MetricsReport("emotion", per_pair, aggregates, statistics, meta, references.footer("emotion"))


def trait_report(
    pairs: Sequence[PairRecord],
    classifier,
    traits: Sequence[str],
    metadata: Mapping | None = None,
) -> MetricsReport:
    """Per-method trait-removal rates from a multi-label classifier."""
    predict = _ImageCache(lambda img: ClassProbabilities(classifier.predict(img), multilabel=True))
    per_pair = []
    orig: dict[str, list] = defaultdict(list)
    anon: dict[str, list] = defaultdict(list)
    for p in pairs:
        row = {"id": p.id, "method": p.method_tag, "error": None}
        try:
            po = predict(p.original_path)
            pa = predict(p.anonymized_path)
        except (OSError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            per_pair.append(row)
            continue
        for t in traits:
            row[f"orig_{t}"] = po[t]
            row[f"anon_{t}"] = pa[t]
        orig[p.method_tag].append(po.probs)
        anon[p.method_tag].append(pa.probs)
        per_pair.append(row)
    aggregates = {}
    for m in sorted(orig):
        counts = trait_removal_counts(orig[m], anon[m], traits)
        aggregates[m] = {
            t: {
                "rate": (removed / present) if present else None,
                "present": present,
                "removed": removed,
                "applicable": present > 0,
            }
            for t, (present, removed) in counts.items()
        }
    meta = {"adapters": {"classifier": adapter_id(classifier)}, "traits": list(traits), **(metadata or {})}
    return MetricsReport("traits", per_pair, aggregates, {}, meta, references.footer("traits"))


def training_f1_report(
    rows: Sequence[Mapping[str, str]],
    labels: Sequence[str],
    metadata: Mapping | None = None,
) -> MetricsReport:
    """F1 reports per method from rows with ``method``, ``y_true`` and ``y_pred``."""
    by_method: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for r in rows:
        t, p = by_method[r["method"]]
        t.append(r["y_true"])
        p.append(r["y_pred"])
    aggregates = {}
    for m in sorted(by_method):
        rep = f1_report(*by_method[m], labels)
        rep["zero_division"] = [list(z) for z in rep["zero_division"]]
        aggregates[m] = rep
    per_pair = [dict(r) for r in rows]
    meta = {"labels": list(labels), **(metadata or {})}
    return MetricsReport("f1", per_pair, aggregates, {}, meta, references.footer("f1"))
