"""Comparison methods: raw-pixel vectors, bag-of-features, softmax head.

Three simpler classifiers to measure the main pipeline against. The
raw-pixel path feeds a downscaled grayscale image straight to the SVM.
The bag-of-features path quantizes dense grayscale patches against a
k-means vocabulary. The softmax head realizes the network-only
comparator: a two-way linear classifier trained on frozen features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ModelError, ShapeError
from .imaging import Raster, resize_bilinear

RAW_PIXEL_SIZE = 64
PATCH_SIZE = 16
GRID_STEP = 8
DESCRIPTOR_FRAME = 227


def _grayscale(raster: Raster) -> np.ndarray:
    """Luminance in [0, 1]; integer weights keep white exactly 1.0."""
    px = raster.pixels.astype(np.float64)
    lum = 299.0 * px[:, :, 0] + 587.0 * px[:, :, 1] + 114.0 * px[:, :, 2]
    return lum / 255000.0


def raw_pixel_vector(raster: Raster) -> np.ndarray:
    """Grayscale 64x64 resize flattened row-major, scaled to [0, 1]."""
    small = resize_bilinear(raster, RAW_PIXEL_SIZE, RAW_PIXEL_SIZE)
    return _grayscale(small).reshape(-1)


def extract_patch_descriptors(
    raster: Raster,
    *,
    patch_size: int = PATCH_SIZE,
    grid_step: int = GRID_STEP,
) -> np.ndarray:
    """Dense normalized grayscale patches from the 227x227 resize.

    Each patch is flattened, shifted to zero mean, and scaled to unit
    variance; constant patches are dropped. Returns an (n, patch²)
    array, possibly with zero rows.
    """
    frame = resize_bilinear(raster, DESCRIPTOR_FRAME, DESCRIPTOR_FRAME)
    gray = _grayscale(frame)
    rows = []
    for y in range(0, DESCRIPTOR_FRAME - patch_size + 1, grid_step):
        for x in range(0, DESCRIPTOR_FRAME - patch_size + 1, grid_step):
            patch = gray[y : y + patch_size, x : x + patch_size].reshape(-1)
            centered = patch - patch.mean()
            variance = float(np.mean(centered * centered))
            if variance <= 1e-12:
                continue
            rows.append(centered / np.sqrt(variance))
    if not rows:
        return np.empty((0, patch_size * patch_size), dtype=np.float64)
    return np.vstack(rows)


@dataclass
class Vocabulary:
    """K centroids over patch descriptors plus the sampling config."""

    centroids: np.ndarray
    patch_size: int = PATCH_SIZE
    grid_step: int = GRID_STEP
    objective_log: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ModelError("vocabulary needs at least one centroid")
        if not np.all(np.isfinite(c)):
            raise ModelError("vocabulary centroids must be finite")
        if c.shape[1] != self.patch_size * self.patch_size:
            raise ModelError(
                f"centroid length {c.shape[1]} does not match "
                f"patch size {self.patch_size}² = {self.patch_size ** 2}"
            )
        self.centroids = c

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    sq_p = np.sum(points * points, axis=1)[:, np.newaxis]
    sq_c = np.sum(centroids * centroids, axis=1)[np.newaxis, :]
    return np.maximum(sq_p + sq_c - 2.0 * (points @ centroids.T), 0.0)


def _plus_plus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[int(rng.integers(n))]
    min_d2 = _squared_distances(points, centroids[:1]).reshape(-1)
    for idx in range(1, k):
        total = min_d2.sum()
        if total <= 0:
            # All remaining points coincide with a centroid already.
            centroids[idx] = points[int(rng.integers(n))]
            continue
        probs = min_d2 / total
        choice = int(rng.choice(n, p=probs))
        centroids[idx] = points[choice]
        d2 = _squared_distances(points, centroids[idx : idx + 1]).reshape(-1)
        np.minimum(min_d2, d2, out=min_d2)
    return centroids


def kmeans(descriptors, k: int, iters: int = 50, seed: int = 0) -> Vocabulary:
    """Lloyd's algorithm with k-means++ seeding.

    Runs until the assignment reaches a fixpoint or the iteration cap;
    empty clusters are reseeded to the point farthest from its nearest
    centroid. The per-iteration quantization objective is kept on the
    returned vocabulary for inspection.
    """
    points = np.asarray(descriptors, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DataError("k-means needs a non-empty 2-d descriptor array")
    if k < 1:
        raise DataError(f"cluster count must be positive, got {k}")
    if points.shape[0] < k:
        raise DataError(
            f"cannot form {k} clusters from {points.shape[0]} descriptors"
        )
    side = int(round(np.sqrt(points.shape[1])))
    if side * side != points.shape[1]:
        raise DataError(
            f"descriptor length {points.shape[1]} is not a square patch size"
        )

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_seed(points, k, rng)
    log = []
    assignment = None
    for _ in range(iters):
        d2 = _squared_distances(points, centroids)
        new_assignment = np.argmin(d2, axis=1)
        log.append(float(d2[np.arange(points.shape[0]), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        min_d2 = d2[np.arange(points.shape[0]), assignment].copy()
        for cluster in range(k):
            members = assignment == cluster
            if members.any():
                centroids[cluster] = points[members].mean(axis=0)
            else:
                farthest = int(np.argmax(min_d2))
                centroids[cluster] = points[farthest]
                assignment[farthest] = cluster
                min_d2[farthest] = -1.0
    return Vocabulary(
        centroids=centroids, patch_size=side, grid_step=GRID_STEP, objective_log=log
    )


def encode_descriptors(descriptors: np.ndarray, vocab: Vocabulary) -> np.ndarray:
    """Hard-assignment histogram over the vocabulary, L1-normalized."""
    points = np.asarray(descriptors, dtype=np.float64)
    if points.size == 0:
        return np.full(vocab.k, 1.0 / vocab.k)
    if points.ndim != 2 or points.shape[1] != vocab.centroids.shape[1]:
        raise ShapeError(
            "descriptor length does not match the vocabulary",
            dimension="columns",
            expected=vocab.centroids.shape[1],
            found=points.shape[1] if points.ndim == 2 else "2-d array",
        )
    d2 = _squared_distances(points, vocab.centroids)
    assignment = np.argmin(d2, axis=1)
    counts = np.bincount(assignment, minlength=vocab.k).astype(np.float64)
    return counts / counts.sum()


def encode_bof(raster: Raster, vocab: Vocabulary) -> np.ndarray:
    """Histogram encoding of one image; constant images map to 1/K."""
    descriptors = extract_patch_descriptors(
        raster, patch_size=vocab.patch_size, grid_step=vocab.grid_step
    )
    return encode_descriptors(descriptors, vocab)


def serialize_vocabulary(vocab: Vocabulary) -> bytes:
    doc = {
        "format": "featpipe-vocab/1",
        "config": {"patch_size": vocab.patch_size, "grid_step": vocab.grid_step},
        "centroids": [[float(v) for v in row] for row in vocab.centroids],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def deserialize_vocabulary(data: bytes) -> Vocabulary:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"vocabulary document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "centroids" not in doc or "config" not in doc:
        raise ModelError("vocabulary document lacks config or centroids")
    config = doc["config"]
    try:
        centroids = np.asarray(doc["centroids"], dtype=np.float64)
        return Vocabulary(
            centroids=centroids,
            patch_size=int(config["patch_size"]),
            grid_step=int(config["grid_step"]),
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ModelError(f"vocabulary document malformed: {exc}") from exc


@dataclass
class SoftmaxHead:
    """A two-way linear classifier over fixed feature vectors."""

    weights: np.ndarray
    bias: np.ndarray
    class_names: tuple
    training_meta: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2 or w.shape[0] != 2 or b.shape != (2,):
            raise ModelError("softmax head needs a 2xD weight matrix and 2 biases")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelError("softmax head parameters must be finite")
        if len(self.class_names) != 2:
            raise ModelError("softmax head needs exactly two class names")
        self.weights = w
        self.bias = b
        self.class_names = tuple(self.class_names)


def _feature_matrix(features) -> np.ndarray:
    rows = []
    for item in features:
        values = getattr(item, "values", item)
        rows.append(np.asarray(values, dtype=np.float64).reshape(-1))
    if not rows:
        raise DataError("no feature vectors given")
    return np.vstack(rows)


def softmax_loss_and_grad(w, b, x, targets):
    """Mean cross-entropy plus its analytic gradients.

    targets hold class indices 0/1. Returns (loss, grad_w, grad_b).
    """
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.intp)
    z = x @ w.T + b[np.newaxis, :]
    z -= z.max(axis=1, keepdims=True)
    exp = np.exp(z)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    n = x.shape[0]
    # log(prob) via z - logsumexp(z): finite even when a probability
    # underflows to zero in the division above.
    log_probs = z - np.log(total)
    loss = float(-np.mean(log_probs[np.arange(n), targets]))
    delta = probs
    delta[np.arange(n), targets] -= 1.0
    grad_w = delta.T @ x / n
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


def train_softmax_head(
    features,
    labels,
    lr: float = 0.1,
    epochs: int = 100,
    seed: int = 0,
    class_names: tuple = None,
) -> SoftmaxHead:
    """Full-batch gradient descent on mean cross-entropy.

    Weights start from a small seeded normal draw so a zero-epoch run
    is still reproducible. Class index order defaults to the sorted
    distinct labels.
    """
    x = _feature_matrix(features)
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise DataError(
            f"feature rows ({x.shape[0]}) and labels ({len(labels)}) differ in count"
        )
    if class_names is None:
        class_names = tuple(sorted(set(labels)))
    if len(class_names) != 2:
        raise DataError(f"expected exactly two classes, found {list(class_names)}")
    index = {name: i for i, name in enumerate(class_names)}
    try:
        targets = np.array([index[label] for label in labels], dtype=np.intp)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]!r} is not in {list(class_names)}") from exc
    if len(set(targets.tolist())) < 2:
        raise DataError("training labels cover only a single class")

    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=(2, x.shape[1]))
    b = np.zeros(2, dtype=np.float64)
    trace = []
    for _ in range(epochs):
        loss, grad_w, grad_b = softmax_loss_and_grad(w, b, x, targets)
        trace.append(loss)
        w -= lr * grad_w
        b -= lr * grad_b
    return SoftmaxHead(
        weights=w,
        bias=b,
        class_names=class_names,
        training_meta={"lr": float(lr), "epochs": int(epochs), "seed": int(seed)},
        loss_trace=trace,
    )


def predict_softmax(head: SoftmaxHead, x) -> str:
    """Class name with the larger logit; a tie picks class index 0."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64).reshape(-1)
    if x.shape[0] != head.weights.shape[1]:
        raise ShapeError(
            "probe length does not match the head weights",
            dimension="length",
            expected=head.weights.shape[1],
            found=x.shape[0],
        )
    z = head.weights @ x + head.bias
    return head.class_names[int(np.argmax(z))]


def predict_softmax_many(head: SoftmaxHead, features) -> list:
    x = _feature_matrix(features)
    if x.shape[1] != head.weights.shape[1]:
        raise ShapeError(
            "probe length does not match the head weights",
            dimension="columns",
            expected=head.weights.shape[1],
            found=x.shape[1],
        )
    z = x @ head.weights.T + head.bias[np.newaxis, :]
    return [head.class_names[int(i)] for i in np.argmax(z, axis=1)]
