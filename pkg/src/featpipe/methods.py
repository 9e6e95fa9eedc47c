"""Classification methods behind one uniform fit/predict interface.

The learning-curve harness only needs four things from a method: a
name, a per-image feature count, fit(samples), and predict(samples).
This module wraps the network feature extractor, the raw-pixel and
bag-of-features baselines, and the softmax head in that shape so they
all run through the identical experiment path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import baselines
from .errors import DataError, ModelError
from .graph import FEATURE_DIM, extract_features
from .imaging import INPUT_HEIGHT, INPUT_WIDTH, Raster, resize_bilinear, to_input_tensor
from .svm import KernelSpec, predict_many, smo_train


@dataclass(frozen=True)
class Sample:
    """One labeled image as the methods consume it."""

    image_id: str
    label: str
    raster: Raster


class CnnFeatures:
    """Feature-tap extraction with a per-image cache.

    Learning curves call fit on nested subsets, so every image would
    otherwise be pushed through the network several times. The cache
    keys on image id; callers must keep ids unique.
    """

    def __init__(self, graph, bundle, mean=None):
        self.graph = graph
        self.bundle = bundle
        self.mean = mean
        self._cache = {}

    def __call__(self, sample: Sample) -> np.ndarray:
        cached = self._cache.get(sample.image_id)
        if cached is None:
            frame = resize_bilinear(sample.raster, INPUT_WIDTH, INPUT_HEIGHT)
            tensor = (
                to_input_tensor(frame)
                if self.mean is None
                else to_input_tensor(frame, mean=self.mean)
            )
            vec = extract_features(
                self.graph, self.bundle, tensor, image_id=sample.image_id
            )
            cached = np.asarray(vec.values, dtype=np.float64)
            self._cache[sample.image_id] = cached
        return cached


def raw_pixel_features(sample: Sample) -> np.ndarray:
    return baselines.raw_pixel_vector(sample.raster)


def _labels_to_signs(samples):
    classes = sorted({s.label for s in samples})
    if len(classes) != 2:
        raise DataError(f"need exactly two classes to train, found {classes}")
    y = np.array([1.0 if s.label == classes[0] else -1.0 for s in samples])
    return y, {1: classes[0], -1: classes[1]}


class SvmMethod:
    """An SVM trained on whatever the feature function produces."""

    def __init__(
        self,
        name: str,
        feature_fn,
        features_per_image: int,
        *,
        C: float = 1.0,
        kernel: KernelSpec = None,
        tol: float = 1e-3,
        max_passes: int = 50,
    ):
        self.name = name
        self.feature_fn = feature_fn
        self.features_per_image = int(features_per_image)
        self.C = float(C)
        self.kernel = kernel or KernelSpec("linear")
        self.tol = float(tol)
        self.max_passes = int(max_passes)
        self.model = None

    def _matrix(self, samples) -> np.ndarray:
        return np.vstack([self.feature_fn(s) for s in samples])

    def fit(self, samples) -> None:
        samples = list(samples)
        y, class_map = _labels_to_signs(samples)
        self.model = smo_train(
            self._matrix(samples),
            y,
            C=self.C,
            kernel=self.kernel,
            tol=self.tol,
            max_passes=self.max_passes,
            class_map=class_map,
        )

    def predict(self, samples) -> list:
        if self.model is None:
            raise ModelError(f"method {self.name!r} has not been fitted")
        return predict_many(self.model, self._matrix(list(samples)))


def cnn_svm_method(graph, bundle, *, features: CnnFeatures = None, **svm_kw) -> SvmMethod:
    """CNN feature extraction followed by an SVM (the paper's pipeline)."""
    fn = features if features is not None else CnnFeatures(graph, bundle)
    return SvmMethod("cnn_svm", fn, FEATURE_DIM, **svm_kw)


def raw_svm_method(**svm_kw) -> SvmMethod:
    """SVM over 64x64 grayscale pixels, the no-network comparator."""
    return SvmMethod("raw_svm", raw_pixel_features, FEATURE_DIM, **svm_kw)


class BofMethod:
    """Bag-of-features histograms with an SVM on top.

    The visual vocabulary is refit on every training subset, so each
    learning-curve point reflects what that much data alone provides.
    Patch descriptors are cached per image; the k-means pool is capped
    by a seeded subsample to keep clustering affordable.
    """

    name = "bof"

    def __init__(
        self,
        k: int = 32,
        *,
        C: float = 1.0,
        kernel: KernelSpec = None,
        tol: float = 1e-3,
        max_passes: int = 50,
        patch_size: int = 16,
        grid_step: int = 8,
        kmeans_iters: int = 40,
        descriptor_cap: int = 20000,
        seed: int = 0,
    ):
        self.k = int(k)
        self.features_per_image = self.k
        self.C = float(C)
        self.kernel = kernel or KernelSpec("linear")
        self.tol = float(tol)
        self.max_passes = int(max_passes)
        self.patch_size = int(patch_size)
        self.grid_step = int(grid_step)
        self.kmeans_iters = int(kmeans_iters)
        self.descriptor_cap = int(descriptor_cap)
        self.seed = int(seed)
        self.vocab = None
        self.model = None
        self._descriptors = {}

    def _descriptors_for(self, sample: Sample) -> np.ndarray:
        cached = self._descriptors.get(sample.image_id)
        if cached is None:
            cached = baselines.extract_patch_descriptors(
                sample.raster, patch_size=self.patch_size, grid_step=self.grid_step
            )
            self._descriptors[sample.image_id] = cached
        return cached

    def _histograms(self, samples) -> np.ndarray:
        return np.vstack(
            [baselines.encode_descriptors(self._descriptors_for(s), self.vocab) for s in samples]
        )

    def fit(self, samples) -> None:
        samples = list(samples)
        y, class_map = _labels_to_signs(samples)
        pool = np.vstack([self._descriptors_for(s) for s in samples])
        if pool.shape[0] == 0:
            raise DataError("no usable patch descriptors in the training set")
        if pool.shape[0] > self.descriptor_cap:
            rng = np.random.default_rng(self.seed)
            keep = rng.choice(pool.shape[0], size=self.descriptor_cap, replace=False)
            pool = pool[np.sort(keep)]
        k = min(self.k, pool.shape[0])
        self.vocab = baselines.kmeans(pool, k, iters=self.kmeans_iters, seed=self.seed)
        self.model = smo_train(
            self._histograms(samples),
            y,
            C=self.C,
            kernel=self.kernel,
            tol=self.tol,
            max_passes=self.max_passes,
            class_map=class_map,
        )

    def predict(self, samples) -> list:
        if self.model is None or self.vocab is None:
            raise ModelError("method 'bof' has not been fitted")
        return predict_many(self.model, self._histograms(list(samples)))


class SoftmaxMethod:
    """A linear softmax head over the network features."""

    name = "softmax"
    features_per_image = FEATURE_DIM

    def __init__(self, feature_fn, *, lr: float = 0.1, epochs: int = 200, seed: int = 0):
        self.feature_fn = feature_fn
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.head = None

    def _matrix(self, samples) -> np.ndarray:
        return np.vstack([self.feature_fn(s) for s in samples])

    def fit(self, samples) -> None:
        samples = list(samples)
        labels = [s.label for s in samples]
        class_names = tuple(sorted(set(labels)))
        self.head = baselines.train_softmax_head(
            self._matrix(samples),
            labels,
            lr=self.lr,
            epochs=self.epochs,
            seed=self.seed,
            class_names=class_names,
        )

    def predict(self, samples) -> list:
        if self.head is None:
            raise ModelError("method 'softmax' has not been fitted")
        return baselines.predict_softmax_many(self.head, self._matrix(list(samples)))


def softmax_method(graph, bundle, *, features: CnnFeatures = None, **kw) -> SoftmaxMethod:
    """The network-features-plus-softmax comparator."""
    fn = features if features is not None else CnnFeatures(graph, bundle)
    return SoftmaxMethod(fn, **kw)
