"""Splits, confusion matrices, learning curves, and feature statistics.

These are the measurement tools of the pipeline: balanced train/test
splitting, the two-class confusion matrix with its percentage views,
accuracy-versus-training-size curves over nested subsets, and the
range/histogram summary of extracted feature values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass
class ConfusionMatrix:
    """2x2 counts indexed [actual][predicted] plus derived views."""

    classes: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2, 2):
            raise DataError(f"confusion counts must be 2x2, got {counts.shape}")
        if np.any(counts < 0):
            raise DataError("confusion counts must be non-negative")
        if len(self.classes) != 2:
            raise DataError("confusion matrix needs exactly two classes")
        self.classes = tuple(self.classes)
        self.counts = counts

    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total()

    def cell_shares(self) -> np.ndarray:
        """Each cell as a fraction of all predictions (Figure-style)."""
        return self.counts / self.total()

    def row_normalized(self) -> np.ndarray:
        """Per-actual-class rates; rows with no members stay zero."""
        out = np.zeros((2, 2), dtype=np.float64)
        for i in range(2):
            row_sum = self.counts[i].sum()
            if row_sum > 0:
                out[i] = self.counts[i] / row_sum
        return out

    def column_normalized(self) -> np.ndarray:
        """Per-predicted-class rates; empty columns stay zero."""
        out = np.zeros((2, 2), dtype=np.float64)
        for j in range(2):
            col_sum = self.counts[:, j].sum()
            if col_sum > 0:
                out[:, j] = self.counts[:, j] / col_sum
        return out


def confusion(predictions, actual, classes: tuple = None) -> ConfusionMatrix:
    """Count predictions against ground truth for two classes."""
    predictions = list(predictions)
    actual = list(actual)
    if not actual:
        raise DataError("confusion needs at least one prediction")
    if len(predictions) != len(actual):
        raise DataError(
            f"prediction count {len(predictions)} does not match "
            f"actual count {len(actual)}"
        )
    if classes is None:
        classes = tuple(sorted(set(actual) | set(predictions)))
    if len(classes) != 2:
        raise DataError(f"expected exactly two classes, found {list(classes)}")
    index = {name: i for i, name in enumerate(classes)}
    counts = np.zeros((2, 2), dtype=np.int64)
    for pred, truth in zip(predictions, actual):
        if truth not in index:
            raise DataError(f"unknown actual class {truth!r}")
        if pred not in index:
            raise DataError(f"unknown predicted class {pred!r}")
        counts[index[truth], index[pred]] += 1
    return ConfusionMatrix(classes=tuple(classes), counts=counts)


def split_balanced(manifest, per_class_train: int, seed: int = 0):
    """Seeded per-class shuffle into disjoint train and test lists.

    The first per_class_train members of each class go to training;
    the test side takes the same count when available, otherwise all
    that remain (at least one).
    """
    if per_class_train < 1:
        raise DataError(f"per-class train count must be positive, got {per_class_train}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in manifest.classes:
        members = [rec for rec in manifest.records if rec.label == cls]
        if len(members) < per_class_train + 1:
            raise DataError(
                f"class {cls!r} has {len(members)} members; "
                f"need at least {per_class_train + 1} to split"
            )
        order = rng.permutation(len(members))
        shuffled = [members[i] for i in order]
        train.extend(shuffled[:per_class_train])
        take = min(per_class_train, len(members) - per_class_train)
        test.extend(shuffled[per_class_train : per_class_train + take])
    return train, test


@dataclass(frozen=True)
class LearningCurvePoint:
    """Accuracy of one method at one training-set size."""

    method: str
    fraction: float
    n_images: int
    n_features: int
    accuracy: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise DataError(f"fraction must lie in (0, 1], got {self.fraction}")
        if not (0.0 <= self.accuracy <= 1.0):
            raise DataError(f"accuracy must lie in [0, 1], got {self.accuracy}")


def nested_subset_order(samples, seed: int = 0) -> list:
    """A seeded order whose prefixes are class-balanced within one.

    Each class is shuffled independently, then classes are interleaved
    round-robin; any prefix of the result is a valid nested subset.
    """
    classes = sorted({s.label for s in samples})
    rng = np.random.default_rng(seed)
    pools = []
    for cls in classes:
        members = [s for s in samples if s.label == cls]
        order = rng.permutation(len(members))
        pools.append([members[i] for i in order])
    interleaved = []
    depth = max(len(p) for p in pools)
    for row in range(depth):
        for pool in pools:
            if row < len(pool):
                interleaved.append(pool[row])
    return interleaved


def learning_curve(method, train, test, fractions, seed: int = 0) -> list:
    """Accuracy on the full test set at growing training prefixes.

    Subsets are nested: under one seed the smaller fraction's images
    are always contained in the larger fraction's.
    """
    fractions = [float(f) for f in fractions]
    if not fractions:
        raise ConfigError("learning curve needs at least one fraction")
    for f in fractions:
        if not (0.0 < f <= 1.0):
            raise ConfigError(f"fractions must lie in (0, 1], got {f}")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ConfigError("fractions must be strictly increasing")

    train = list(train)
    test = list(test)
    classes = sorted({s.label for s in train})
    ordered = nested_subset_order(train, seed=seed)
    actual = [s.label for s in test]
    points = []
    for fraction in fractions:
        n_images = int(round(fraction * len(train)))
        if n_images < len(classes):
            raise DataError(
                f"fraction {fraction} keeps only {n_images} images, "
                f"fewer than one per class"
            )
        subset = ordered[:n_images]
        method.fit(subset)
        predicted = method.predict(test)
        accuracy = float(np.mean([p == a for p, a in zip(predicted, actual)]))
        points.append(
            LearningCurvePoint(
                method=method.name,
                fraction=fraction,
                n_images=n_images,
                n_features=n_images * method.features_per_image,
                accuracy=accuracy,
                seed=seed,
            )
        )
    return points


@dataclass
class FeatureStats:
    """Range and histogram summary over all feature components."""

    minimum: float
    maximum: float
    bin_width: float
    bin_lows: np.ndarray
    bin_counts: np.ndarray
    mode_bin: tuple
    total: int


def feature_stats(features, bin_width: float = 0.5) -> FeatureStats:
    """Global min/max plus a zero-centered histogram of all values.

    Bin k covers [(k - 0.5) * width, (k + 0.5) * width), so one bin is
    always centered on zero. Ties for the mode go to the lowest bin.
    """
    if bin_width <= 0:
        raise ConfigError(f"bin width must be positive, got {bin_width}")
    arrays = [np.asarray(getattr(f, "values", f), dtype=np.float64).reshape(-1) for f in features]
    if not arrays:
        raise DataError("feature statistics need at least one vector")
    values = np.concatenate(arrays)
    if values.size == 0:
        raise DataError("feature statistics need at least one value")
    if not np.all(np.isfinite(values)):
        raise DataError("feature values contain non-finite entries")

    bin_index = np.floor(values / bin_width + 0.5).astype(np.int64)
    k_min = int(bin_index.min())
    k_max = int(bin_index.max())
    counts = np.bincount(bin_index - k_min, minlength=k_max - k_min + 1)
    lows = (np.arange(k_min, k_max + 1) - 0.5) * bin_width
    mode_k = k_min + int(np.argmax(counts))
    mode_low = (mode_k - 0.5) * bin_width
    return FeatureStats(
        minimum=float(values.min()),
        maximum=float(values.max()),
        bin_width=float(bin_width),
        bin_lows=lows,
        bin_counts=counts,
        mode_bin=(mode_low, mode_low + bin_width),
        total=int(values.size),
    )
