"""Splits, confusion matrices, learning curves, and feature statistics."""

import collections

import numpy as np
import pytest

from featpipe.errors import ConfigError, DataError
from featpipe.evaluation import (
    ConfusionMatrix,
    LearningCurvePoint,
    confusion,
    feature_stats,
    learning_curve,
    nested_subset_order,
    split_balanced,
)
from featpipe.imaging import DatasetManifest, ManifestRecord

CLASSES = ("hookah", "nonhookah")


def balanced_manifest(per_class, prefix="img"):
    records = []
    for i in range(per_class):
        records.append(ManifestRecord(path=f"{prefix}_a{i}.png", label=CLASSES[0], split="train"))
        records.append(ManifestRecord(path=f"{prefix}_b{i}.png", label=CLASSES[1], split="train"))
    return DatasetManifest(records=tuple(records), classes=CLASSES, source="synthetic")


def label_counts(records):
    return collections.Counter(r.label for r in records)


class TestSplitBalanced:
    def test_paper_scale_split(self):
        manifest = balanced_manifest(420)
        train, test = split_balanced(manifest, per_class_train=210, seed=0)
        assert len(train) == 420 and len(test) == 420
        assert label_counts(train) == {"hookah": 210, "nonhookah": 210}
        assert label_counts(test) == {"hookah": 210, "nonhookah": 210}

    def test_disjoint(self):
        manifest = balanced_manifest(30)
        train, test = split_balanced(manifest, per_class_train=10, seed=1)
        assert not ({r.path for r in train} & {r.path for r in test})

    def test_same_seed_reproduces(self):
        manifest = balanced_manifest(10)
        first = split_balanced(manifest, per_class_train=5, seed=4)
        second = split_balanced(manifest, per_class_train=5, seed=4)
        assert [r.path for r in first[0]] == [r.path for r in second[0]]
        assert [r.path for r in first[1]] == [r.path for r in second[1]]

    def test_different_seed_differs(self):
        manifest = balanced_manifest(10)
        first = split_balanced(manifest, per_class_train=5, seed=4)
        second = split_balanced(manifest, per_class_train=5, seed=5)
        assert [r.path for r in first[0]] != [r.path for r in second[0]]

    def test_test_side_takes_remainder_when_short(self):
        manifest = balanced_manifest(8)
        train, test = split_balanced(manifest, per_class_train=6, seed=0)
        assert label_counts(train) == {"hookah": 6, "nonhookah": 6}
        assert label_counts(test) == {"hookah": 2, "nonhookah": 2}

    def test_insufficient_members(self):
        manifest = balanced_manifest(5)
        with pytest.raises(DataError, match="hookah"):
            split_balanced(manifest, per_class_train=5, seed=0)

    def test_nonpositive_count(self):
        manifest = balanced_manifest(5)
        with pytest.raises(DataError):
            split_balanced(manifest, per_class_train=0, seed=0)


class TestConfusion:
    def paper_matrix(self):
        predictions = ["hookah"] * 208 + ["nonhookah"] * 2 + ["nonhookah"] * 210
        actual = ["hookah"] * 210 + ["nonhookah"] * 210
        return confusion(predictions, actual, classes=CLASSES)

    def test_paper_counts(self):
        matrix = self.paper_matrix()
        assert matrix.counts.tolist() == [[208, 2], [0, 210]]

    def test_paper_accuracy(self):
        matrix = self.paper_matrix()
        assert matrix.accuracy() == pytest.approx(418 / 420)
        assert format(matrix.accuracy(), ".4f") == "0.9952"
        assert f"{matrix.accuracy() * 100:.1f}%" == "99.5%"

    def test_paper_cell_shares(self):
        shares = self.paper_matrix().cell_shares()
        rendered = [[f"{value * 100:.1f}%" for value in row] for row in shares]
        assert rendered == [["49.5%", "0.5%"], ["0.0%", "50.0%"]]

    def test_all_correct(self):
        matrix = confusion(["a"] * 5 + ["b"] * 5, ["a"] * 5 + ["b"] * 5)
        assert matrix.counts.tolist() == [[5, 0], [0, 5]]
        assert matrix.accuracy() == 1.0

    def test_all_wrong(self):
        matrix = confusion(["b"] * 5 + ["a"] * 5, ["a"] * 5 + ["b"] * 5)
        assert matrix.accuracy() == 0.0
        assert matrix.counts.trace() == 0

    def test_counts_sum_matches_inputs(self):
        rng = np.random.default_rng(11)
        actual = [CLASSES[i] for i in rng.integers(0, 2, size=37)]
        predictions = [CLASSES[i] for i in rng.integers(0, 2, size=37)]
        matrix = confusion(predictions, actual, classes=CLASSES)
        assert matrix.total() == 37
        assert 0.0 <= matrix.accuracy() <= 1.0

    def test_row_normalized_rows_sum_to_one(self):
        matrix = self.paper_matrix()
        rows = matrix.row_normalized()
        assert np.allclose(rows.sum(axis=1), 1.0)

    def test_column_normalized(self):
        matrix = self.paper_matrix()
        cols = matrix.column_normalized()
        assert np.allclose(cols.sum(axis=0), 1.0)

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="does not match"):
            confusion(["a"], ["a", "b"])

    def test_empty(self):
        with pytest.raises(DataError):
            confusion([], [])

    def test_unknown_class(self):
        with pytest.raises(DataError, match="mystery"):
            confusion(["mystery"], ["hookah"], classes=CLASSES)

    def test_default_classes_sorted_union(self):
        matrix = confusion(["b", "a"], ["a", "b"])
        assert matrix.classes == ("a", "b")

    def test_more_than_two_classes_rejected(self):
        with pytest.raises(DataError):
            confusion(["a", "b", "c"], ["a", "b", "c"])

    def test_negative_counts_rejected(self):
        with pytest.raises(DataError):
            ConfusionMatrix(classes=CLASSES, counts=np.array([[-1, 0], [0, 1]]))


class StubMethod:
    """Deterministic always-correct method with the CNN feature width."""

    name = "stub"
    features_per_image = 4096

    def __init__(self):
        self.fitted_subsets = []

    def fit(self, samples):
        self.fitted_subsets.append(list(samples))

    def predict(self, samples):
        return [s.label for s in samples]


class TestLearningCurve:
    def make_pools(self, per_class_train=210, per_class_test=5):
        manifest = balanced_manifest(per_class_train + per_class_test)
        return split_balanced(manifest, per_class_train=per_class_train, seed=2)

    def test_ten_percent_of_420(self):
        train, test = self.make_pools()
        points = learning_curve(StubMethod(), train, test, [0.10], seed=3)
        assert points[0].n_images == 42
        assert points[0].n_features == 42 * 4096 == 172032

    def test_stub_method_scores_one(self):
        train, test = self.make_pools(per_class_train=10)
        points = learning_curve(StubMethod(), train, test, [0.5, 1.0], seed=3)
        assert [p.accuracy for p in points] == [1.0, 1.0]
        assert [p.fraction for p in points] == [0.5, 1.0]

    def test_subsets_nested(self):
        train, test = self.make_pools(per_class_train=50)
        method = StubMethod()
        learning_curve(method, train, test, [0.1, 0.3, 1.0], seed=7)
        small, medium, full = (
            {r.path for r in subset} for subset in method.fitted_subsets
        )
        assert small < medium < full

    def test_subsets_balanced_within_one(self):
        train, test = self.make_pools(per_class_train=50)
        method = StubMethod()
        learning_curve(method, train, test, [0.1, 0.25, 0.55, 1.0], seed=7)
        for subset in method.fitted_subsets:
            counts = label_counts(subset)
            assert abs(counts["hookah"] - counts["nonhookah"]) <= 1

    def test_point_count_matches_fractions(self):
        train, test = self.make_pools(per_class_train=20)
        fractions = [round(0.1 * k, 1) for k in range(1, 11)]
        points = learning_curve(StubMethod(), train, test, fractions, seed=1)
        assert len(points) == 10

    def test_same_seed_same_subsets(self):
        train, test = self.make_pools(per_class_train=20)
        first, second = StubMethod(), StubMethod()
        learning_curve(first, train, test, [0.5], seed=6)
        learning_curve(second, train, test, [0.5], seed=6)
        assert [r.path for r in first.fitted_subsets[0]] == [
            r.path for r in second.fitted_subsets[0]
        ]

    def test_fraction_out_of_range(self):
        train, test = self.make_pools(per_class_train=10)
        with pytest.raises(ConfigError):
            learning_curve(StubMethod(), train, test, [0.0, 0.5], seed=0)
        with pytest.raises(ConfigError):
            learning_curve(StubMethod(), train, test, [0.5, 1.5], seed=0)

    def test_fractions_must_increase(self):
        train, test = self.make_pools(per_class_train=10)
        with pytest.raises(ConfigError):
            learning_curve(StubMethod(), train, test, [0.5, 0.5], seed=0)

    def test_fraction_smaller_than_class_count(self):
        train, test = self.make_pools(per_class_train=10)
        with pytest.raises(DataError, match="fewer than one per class"):
            learning_curve(StubMethod(), train, test, [0.05], seed=0)

    def test_point_validation(self):
        with pytest.raises(DataError):
            LearningCurvePoint(
                method="m", fraction=0.0, n_images=1, n_features=1, accuracy=0.5, seed=0
            )
        with pytest.raises(DataError):
            LearningCurvePoint(
                method="m", fraction=0.5, n_images=1, n_features=1, accuracy=1.5, seed=0
            )


class TestNestedSubsetOrder:
    def test_every_prefix_balanced(self):
        manifest = balanced_manifest(25)
        ordered = nested_subset_order(manifest.records, seed=9)
        running = collections.Counter()
        for record in ordered:
            running[record.label] += 1
            assert abs(running["hookah"] - running["nonhookah"]) <= 1

    def test_orders_all_samples(self):
        manifest = balanced_manifest(12)
        ordered = nested_subset_order(manifest.records, seed=9)
        assert sorted(r.path for r in ordered) == sorted(r.path for r in manifest.records)


class TestFeatureStats:
    def test_three_point_example(self):
        stats = feature_stats([np.array([-1.0, 0.0, 1.0], dtype=np.float32)], bin_width=2.0)
        assert stats.minimum == -1.0
        assert stats.maximum == 1.0
        assert stats.mode_bin == (-1.0, 1.0)
        assert stats.total == 3

    def test_constant_zero_mass(self):
        stats = feature_stats([np.zeros(4096, dtype=np.float32)], bin_width=0.5)
        assert stats.mode_bin == (-0.25, 0.25)
        assert int(stats.bin_counts.sum()) == 4096
        assert int(stats.bin_counts.max()) == 4096

    def test_total_mass_across_vectors(self):
        rng = np.random.default_rng(0)
        vectors = [rng.normal(size=4096).astype(np.float32) for _ in range(3)]
        stats = feature_stats(vectors, bin_width=0.5)
        assert stats.total == 3 * 4096
        assert int(stats.bin_counts.sum()) == 3 * 4096

    def test_min_max_global(self):
        vectors = [
            np.array([-3.0, 1.0], dtype=np.float32),
            np.array([0.5, 7.25], dtype=np.float32),
        ]
        stats = feature_stats(vectors, bin_width=1.0)
        assert stats.minimum == -3.0
        assert stats.maximum == 7.25

    def test_mode_tie_goes_to_lowest_bin(self):
        stats = feature_stats([np.array([-2.0, 2.0], dtype=np.float32)], bin_width=1.0)
        assert stats.mode_bin == (-2.5, -1.5)

    def test_zero_centered_bin_exists(self):
        stats = feature_stats([np.array([-0.2, 0.2], dtype=np.float32)], bin_width=1.0)
        assert stats.mode_bin == (-0.5, 0.5)
        assert int(stats.bin_counts.sum()) == 2

    def test_bad_bin_width(self):
        with pytest.raises(ConfigError):
            feature_stats([np.ones(3, dtype=np.float32)], bin_width=0.0)

    def test_empty_input(self):
        with pytest.raises(DataError):
            feature_stats([], bin_width=0.5)

    def test_non_finite(self):
        with pytest.raises(DataError, match="finite"):
            feature_stats([np.array([1.0, np.nan], dtype=np.float32)], bin_width=0.5)
