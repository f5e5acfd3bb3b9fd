import csv
import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landmark_anon.errors import InvalidArgumentError, UndefinedDistanceError
from landmark_anon.eval import (
    ClassProbabilities,
    Embedding,
    PairRecord,
    PixelStatsEmbedder,
    SyntheticEmotionClassifier,
    SyntheticTraitClassifier,
    anonymity_report,
    class_prob_distance,
    cosine_distance,
    emotion_inference_report,
    f1_report,
    read_pairs_csv,
    trait_removal_rates,
    trait_report,
    training_f1_report,
    write_pairs_csv,
)
from landmark_anon.eval import references
from landmark_anon.eval.plots import plot_report
from landmark_anon.imageops import FaceImage
from landmark_anon.io import load_image, save_image


class TableEmbedder:
    """Returns hand-set vectors keyed by the image's first pixel value."""

    identifier = "table"

    def __init__(self, table):
        self.table = table

    def embed(self, image):
        return self.table.get(round(float(image.pixels[0, 0, 0]) * 255))


class TableClassifier:
    identifier = "table"

    def __init__(self, table):
        self.table = table

    def predict(self, image):
        return self.table[round(float(image.pixels[0, 0, 0]) * 255)]


def write_code_image(path, code):
    px = np.zeros((4, 4, 3))
    px[0, 0, 0] = code / 255
    px[1:, 1:] = 0.5
    save_image(FaceImage(px), path)
    return str(path)


class TestCosine:
    def test_examples(self):
        assert cosine_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
        assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)

    def test_zero_norm(self):
        with pytest.raises(UndefinedDistanceError):
            cosine_distance([0.0, 0.0], [1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            cosine_distance([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_embedding_type(self):
        assert cosine_distance(Embedding([1, 1]), Embedding([2, 2])) == pytest.approx(0.0, abs=1e-15)
        with pytest.raises(InvalidArgumentError):
            Embedding([1.0, np.nan])

    @settings(max_examples=60)
    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.01, 100),
    )
    def test_properties(self, a, b, scale):
        a, b = np.array(a), np.array(b)
        if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
            return
        d = cosine_distance(a, b)
        assert 0.0 <= d <= 2.0
        assert d == pytest.approx(cosine_distance(b, a), abs=1e-12)
        assert d == pytest.approx(cosine_distance(a * scale, b), abs=1e-9)


class TestClassProb:
    def test_examples(self):
        o = ClassProbabilities({"happy": 0.8, "sad": 0.2})
        a = ClassProbabilities({"happy": 0.6, "sad": 0.4})
        assert class_prob_distance(o, a, "happy") == pytest.approx(0.2)
        assert class_prob_distance(o, o, "sad") == 0.0

    def test_missing_label(self):
        o = ClassProbabilities({"happy": 1.0})
        with pytest.raises(InvalidArgumentError):
            class_prob_distance(o, o, "sad")

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            ClassProbabilities({"a": 0.5, "b": 0.6})
        with pytest.raises(InvalidArgumentError):
            ClassProbabilities({"a": 1.5}, multilabel=True)
        ClassProbabilities({"a": 0.9, "b": 0.9}, multilabel=True)


def confusion_oracle(y_true, y_pred, labels):
    """F1 figures from an explicit confusion matrix, with exact fractions."""
    from fractions import Fraction

    idx = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[idx[t], idx[p]] += 1
    out = {}
    for c, i in idx.items():
        tp = cm[i, i]
        col, row = cm[:, i].sum(), cm[i, :].sum()
        prec = Fraction(int(tp), int(col)) if col else Fraction(0)
        rec = Fraction(int(tp), int(row)) if row else Fraction(0)
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
        out[c] = (float(prec), float(rec), float(f1), int(row))
    return out, float(Fraction(int(np.trace(cm)), len(y_true)))


class TestF1:
    def test_perfect(self):
        rep = f1_report(["a", "b", "a"], ["a", "b", "a"], ["a", "b"])
        assert rep["accuracy"] == 1.0
        assert all(m["f1"] == 1.0 for m in rep["per_class"].values())
        assert rep["macro avg"]["f1"] == rep["weighted avg"]["f1"] == 1.0

    def test_hand_example(self):
        rep = f1_report(["a", "a", "b", "b"], ["a", "b", "b", "b"], ["a", "b"])
        a, b = rep["per_class"]["a"], rep["per_class"]["b"]
        assert (a["precision"], a["recall"]) == (1.0, 0.5)
        assert a["f1"] == pytest.approx(2 / 3, abs=1e-15)
        assert b["precision"] == pytest.approx(2 / 3, abs=1e-15) and b["recall"] == 1.0
        assert b["f1"] == pytest.approx(0.8, abs=1e-15)
        assert rep["accuracy"] == 0.75

    def test_zero_division_flagged(self):
        rep = f1_report(["a", "a"], ["a", "a"], ["a", "b"])
        assert rep["per_class"]["b"]["f1"] == 0.0
        assert ("b", "precision") in rep["zero_division"]

    def test_errors(self):
        with pytest.raises(InvalidArgumentError):
            f1_report(["a"], ["a", "b"], ["a", "b"])
        with pytest.raises(InvalidArgumentError):
            f1_report(["a", "c"], ["a", "a"], ["a", "b"])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_confusion_oracle(self, seed):
        rng = np.random.default_rng(seed)
        labels = ["x", "y", "z", "w"][: rng.integers(2, 5)]
        n = int(rng.integers(1, 30))
        y_true = list(rng.choice(labels, n))
        y_pred = list(rng.choice(labels, n))
        rep = f1_report(y_true, y_pred, labels)
        oracle, acc = confusion_oracle(y_true, y_pred, labels)
        assert rep["accuracy"] == acc
        for c, (p, r, f, s) in oracle.items():
            m = rep["per_class"][c]
            assert (m["precision"], m["recall"], m["support"]) == (p, r, s)
            assert m["f1"] == pytest.approx(f, abs=1e-15)
        weighted = sum(oracle[c][2] * oracle[c][3] for c in labels) / n
        assert rep["weighted avg"]["f1"] == pytest.approx(weighted, abs=1e-9)


class TestTraitRemoval:
    def test_all_removed(self):
        orig = [{"a": 0.9, "b": 0.1}, {"a": 0.7, "b": 0.6}]
        anon = [{"a": 0.0, "b": 0.0}, {"a": 0.0, "b": 0.0}]
        assert trait_removal_rates(orig, anon, ["a", "b"]) == {"a": 1.0, "b": 1.0}

    def test_four_present_three_removed(self):
        orig = [{"t": p} for p in (0.9, 0.8, 0.6, 0.55, 0.2)]
        anon = [{"t": p} for p in (0.1, 0.5, 0.2, 0.9, 0.9)]
        assert trait_removal_rates(orig, anon, ["t"]) == {"t": 0.75}

    def test_not_applicable(self):
        assert trait_removal_rates([{"t": 0.5}], [{"t": 0.0}], ["t"]) == {"t": None}

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_counting_oracle(self, seed):
        rng = np.random.default_rng(seed)
        traits = [f"t{i}" for i in range(5)]
        n = int(rng.integers(1, 25))
        # quantized so exact 0.5 ties occur
        o = np.round(rng.uniform(size=(n, 5)) * 8) / 8
        a = np.round(rng.uniform(size=(n, 5)) * 8) / 8
        rates = trait_removal_rates(o, a, traits)
        for j, t in enumerate(traits):
            present = [i for i in range(n) if o[i, j] > 0.5]
            removed = [i for i in present if not a[i, j] > 0.5]
            assert rates[t] == (len(removed) / len(present) if present else None)


@pytest.fixture
def coded_pairs(tmp_path):
    """Pairs whose images carry a code in their first pixel."""
    paths = {c: write_code_image(tmp_path / f"{c}.png", c) for c in range(1, 12)}
    return paths


class TestAnonymityReport:
    def test_two_pair_mean(self, coded_pairs):
        emb = TableEmbedder({1: [1.0, 0.0], 2: [1.0, 0.0], 3: [0.0, 1.0]})
        pairs = [
            PairRecord("p1", coded_pairs[1], coded_pairs[2], "m"),
            PairRecord("p2", coded_pairs[1], coded_pairs[3], "m"),
        ]
        rep = anonymity_report(pairs, emb)
        assert rep.aggregates["m"]["mean_distance"] == pytest.approx(0.5)
        assert rep.aggregates["m"]["re_identifiable"] is False

    def test_identity_and_skips(self, coded_pairs):
        emb = TableEmbedder({1: [0.3, 0.4], 2: [1.0, 1.0]})
        pairs = [
            PairRecord("a", coded_pairs[1], coded_pairs[1], "original"),
            PairRecord("b", coded_pairs[2], coded_pairs[2], "original"),
            PairRecord("c", coded_pairs[1], coded_pairs[5], "original"),  # no embedding
            PairRecord("d", coded_pairs[1], "/nonexistent.png", "original"),
        ]
        rep = anonymity_report(pairs, emb)
        agg = rep.aggregates["original"]
        assert agg["mean_distance"] == 0.0 and agg["n"] == 2 and agg["skipped"] == 2
        assert agg["re_identifiable"] is True
        assert [r["error"] is None for r in rep.per_pair] == [True, True, False, False]

    def test_aggregates_recomputable(self, fixture_dir):
        imgs = sorted(fixture_dir.glob("img_*.png"))
        pairs = [PairRecord(p.stem, str(p), str(imgs[(i + 1) % len(imgs)]), "shift") for i, p in enumerate(imgs)]
        rep = anonymity_report(pairs, PixelStatsEmbedder())
        d = [r["distance"] for r in rep.per_pair]
        assert rep.aggregates["shift"]["mean_distance"] == pytest.approx(np.mean(d), abs=1e-15)


class TestEmotionReport:
    LABELS = ["happy", "sad"]

    def table(self):
        return {
            1: {"happy": 0.9, "sad": 0.1},
            2: {"happy": 0.6, "sad": 0.4},
            3: {"happy": 0.2, "sad": 0.8},
            4: {"happy": 0.5, "sad": 0.5},
            5: {"happy": 0.7, "sad": 0.3},
        }

    def test_identical_pairs_zero(self, coded_pairs):
        pairs = [PairRecord(str(c), coded_pairs[c], coded_pairs[c], "ours", "happy") for c in (1, 2, 3)]
        rep = emotion_inference_report(pairs, TableClassifier(self.table()), self.LABELS)
        assert all(v["mean"] == 0.0 for v in rep.aggregates["ours"].values())

    def test_four_pair_means(self, coded_pairs):
        pairs = [
            PairRecord("a", coded_pairs[1], coded_pairs[2], "ours", "happy"),
            PairRecord("b", coded_pairs[3], coded_pairs[4], "ours", "sad"),
            PairRecord("a", coded_pairs[1], coded_pairs[3], "blur-9", "happy"),
            PairRecord("b", coded_pairs[3], coded_pairs[5], "blur-9", "sad"),
        ]
        rep = emotion_inference_report(pairs, TableClassifier(self.table()), self.LABELS)
        assert rep.aggregates["ours"]["happy"]["mean"] == pytest.approx((0.3 + 0.3) / 2, abs=1e-12)
        assert rep.aggregates["blur-9"]["sad"]["mean"] == pytest.approx((0.7 + 0.5) / 2, abs=1e-12)
        block = rep.statistics["happy"]["ours_vs_blur-9"]
        assert {"p", "Z", "r", "N"} <= set(block)
        assert block["N"] == 2

        sub = emotion_inference_report(pairs, TableClassifier(self.table()), self.LABELS, subset="labelled")
        assert sub.aggregates["ours"]["happy"] == {"mean": pytest.approx(0.3), "n": 1}

    def test_statistics_for_every_emotion(self, fixture_dir, tmp_path):
        from landmark_anon.imageops import blur, pixelate

        labels = references.EMOTIONS["faces"]
        pairs = []
        for p in sorted(fixture_dir.glob("img_*.png")):
            img = load_image(p)
            for tag, op in (("ours", lambda x: pixelate(x, 8)), ("blur-9", lambda x: blur(x, 9))):
                out = tmp_path / f"{p.stem}_{tag}.png"
                save_image(op(img), out)
                pairs.append(PairRecord(p.stem, str(p), str(out), tag))
        rep = emotion_inference_report(pairs, SyntheticEmotionClassifier(labels), labels)
        assert set(rep.statistics) == set(labels)
        blocks = [rep.statistics[e]["ours_vs_blur-9"] for e in labels]
        for b in blocks:
            assert {"p", "Z", "r", "N", "p_corrected", "flag"} <= set(b)
            assert b["N"] == 10
            assert b["r"] == pytest.approx(b["Z"] / np.sqrt(10))
            assert b["p_corrected"] == min(1.0, b["p"] * len(labels))
        for e in labels:
            vals = [r[f"dist_{e}"] for r in rep.per_pair if r["method"] == "ours"]
            assert rep.aggregates["ours"][e]["mean"] == pytest.approx(np.mean(vals), abs=1e-12)

    def test_degenerate_comparison(self, coded_pairs):
        pairs = [
            PairRecord("a", coded_pairs[1], coded_pairs[1], "ours"),
            PairRecord("a", coded_pairs[1], coded_pairs[1], "other"),
        ]
        rep = emotion_inference_report(pairs, TableClassifier(self.table()), self.LABELS)
        b = rep.statistics["happy"]["ours_vs_other"]
        assert b["degenerate"] and b["p"] == 1.0 and b["r"] == 0.0

    def test_bad_subset(self):
        with pytest.raises(InvalidArgumentError):
            emotion_inference_report([], None, ["a"], subset="nope")


class TestTraitReport:
    def test_rates(self, coded_pairs):
        table = {
            1: {"Bald": 0.9, "Young": 0.2},
            2: {"Bald": 0.1, "Young": 0.9},
            3: {"Bald": 0.8, "Young": 0.1},
        }
        pairs = [
            PairRecord("a", coded_pairs[1], coded_pairs[2], "ours"),
            PairRecord("b", coded_pairs[3], coded_pairs[1], "ours"),
        ]
        rep = trait_report(pairs, TableClassifier(table), ["Bald", "Young"])
        assert rep.aggregates["ours"]["Bald"] == {"rate": 0.5, "present": 2, "removed": 1, "applicable": True}
        assert rep.aggregates["ours"]["Young"]["rate"] is None

    def test_synthetic_classifier(self, fixture_dir):
        imgs = sorted(fixture_dir.glob("img_*.png"))
        pairs = [PairRecord(p.stem, str(p), str(p), "original") for p in imgs]
        rep = trait_report(pairs, SyntheticTraitClassifier(references.CELEBA_TRAITS), references.CELEBA_TRAITS)
        assert all(v["removed"] == 0 for v in rep.aggregates["original"].values())


class TestReportIO:
    def test_pairs_csv_round_trip(self, tmp_path, coded_pairs):
        pairs = [PairRecord("a", coded_pairs[1], coded_pairs[2], "ours", "happy"),
                 PairRecord("b", coded_pairs[3], coded_pairs[4], "pixelate-8")]
        write_pairs_csv(pairs, tmp_path / "pairs.csv")
        with open(tmp_path / "pairs.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["id", "original_path", "anonymized_path", "method", "label"]
        assert rows[1][1] == "1.png"  # relative to the CSV
        back = read_pairs_csv(tmp_path / "pairs.csv")
        assert [(p.id, p.method_tag, p.label) for p in back] == [("a", "ours", "happy"), ("b", "pixelate-8", None)]
        assert load_image(back[0].original_path).pixels.shape == (4, 4, 3)

    def test_missing_columns(self, tmp_path):
        (tmp_path / "p.csv").write_text("id,original_path\n")
        with pytest.raises(InvalidArgumentError):
            read_pairs_csv(tmp_path / "p.csv")

    def test_write_deterministic(self, tmp_path, coded_pairs):
        emb = TableEmbedder({1: [1.0, 0.0], 2: [0.6, 0.8]})
        pairs = [PairRecord("a", coded_pairs[1], coded_pairs[2], "m")]
        anonymity_report(pairs, emb).write(tmp_path / "x")
        anonymity_report(pairs, emb).write(tmp_path / "y")
        for name in ("anonymity.json", "anonymity.csv"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
        doc = json.loads((tmp_path / "x" / "anonymity.json").read_text())
        assert set(doc) == {"kind", "per_pair", "aggregates", "statistics", "metadata", "references"}

    def test_plot_does_not_change_report(self, tmp_path, coded_pairs):
        emb = TableEmbedder({1: [1.0, 0.0], 2: [0.6, 0.8]})
        rep = anonymity_report([PairRecord("a", coded_pairs[1], coded_pairs[2], "m")], emb)
        before = rep.dumps()
        assert plot_report(rep, tmp_path / "a.png").exists()
        assert rep.dumps() == before


def test_training_f1_report():
    rows = [
        {"method": "ours", "y_true": "a", "y_pred": "a"},
        {"method": "ours", "y_true": "b", "y_pred": "a"},
        {"method": "original", "y_true": "a", "y_pred": "a"},
        {"method": "original", "y_true": "b", "y_pred": "b"},
    ]
    rep = training_f1_report(rows, ["a", "b"])
    assert rep.aggregates["original"]["accuracy"] == 1.0
    assert rep.aggregates["ours"]["accuracy"] == 0.5
    assert rep.references["training_scenario"]["affectnet"]["original"]["weighted_f1"] == 0.58


def test_synthetic_adapters_deterministic():
    img = FaceImage(np.random.default_rng(0).uniform(0, 1, (30, 30, 3)))
    a = SyntheticEmotionClassifier(["x", "y", "z"]).predict(img)
    assert a == SyntheticEmotionClassifier(["x", "y", "z"]).predict(img)
    assert sum(a.values()) == pytest.approx(1.0)
    assert PixelStatsEmbedder().embed(FaceImage(np.zeros((8, 8, 3)))) is None
    counts = Counter(v > 0.5 for v in SyntheticTraitClassifier(references.CELEBA_TRAITS).predict(img).values())
    assert sum(counts.values()) == 40
