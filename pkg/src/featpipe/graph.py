"""The 25-layer network definition, forward execution, and feature tap.

The graph is a flat ordered list of layer specs. Only the built-in
stack is supported; it is frozen here with the strides, pads, and group
counts of the classic design. Forward execution walks the list and
delegates the arithmetic to the ops module. Features are read from the
fc7 layer before its ReLU, so they keep their negative components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ModelError, ShapeError
from .imaging import Raster

LAYER_KINDS = (
    "input",
    "conv",
    "relu",
    "lrn",
    "maxpool",
    "fc",
    "dropout",
    "softmax",
    "output",
)

FEATURE_DIM = 4096


@dataclass(frozen=True)
class LayerSpec:
    """One layer: a kind plus the hyperparameters that kind needs."""

    name: str
    kind: str
    shape: tuple = None  # input only: (channels, height, width)
    filters: int = None  # conv: number of output channels
    kernel: int = None  # conv and maxpool: square window size
    stride: int = None  # conv and maxpool
    pad: int = None  # conv only
    groups: int = None  # conv only
    k: float = None  # lrn constants
    n: int = None
    alpha: float = None
    beta: float = None
    width: int = None  # fc: output width

    def __post_init__(self):
        if not self.name:
            raise ModelError("layer name must be non-empty")
        if self.kind not in LAYER_KINDS:
            raise ModelError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        checks = {
            "input": self.shape is not None
            and len(self.shape) == 3
            and all(int(d) > 0 for d in self.shape),
            "conv": all(
                v is not None for v in (self.filters, self.kernel, self.stride, self.pad, self.groups)
            )
            and self.filters > 0
            and self.kernel > 0
            and self.stride > 0
            and self.pad >= 0
            and self.groups > 0,
            "maxpool": self.kernel is not None
            and self.stride is not None
            and self.kernel > 0
            and self.stride > 0,
            "lrn": all(v is not None for v in (self.k, self.n, self.alpha, self.beta))
            and self.k > 0
            and self.n > 0
            and self.n % 2 == 1,
            "fc": self.width is not None and self.width > 0,
        }
        ok = checks.get(self.kind, True)
        if not ok:
            raise ModelError(
                f"layer {self.name!r}: missing or non-positive parameters for kind {self.kind!r}"
            )


@dataclass
class NetworkGraph:
    """An ordered layer stack with a named feature-tap layer."""

    layers: list
    feature_tap: str
    _by_name: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        names = [spec.name for spec in self.layers]
        if len(set(names)) != len(names):
            raise ModelError("layer names must be unique within a graph")
        if not self.layers or self.layers[0].kind != "input":
            raise ModelError("the first layer must be the input layer")
        self._by_name = {spec.name: spec for spec in self.layers}
        tap = self._by_name.get(self.feature_tap)
        if tap is None or tap.kind != "fc":
            raise ModelError(
                f"feature tap {self.feature_tap!r} must name an fc layer"
            )

    def layer(self, name: str) -> LayerSpec:
        spec = self._by_name.get(name)
        if spec is None:
            raise ModelError(f"graph has no layer named {name!r}")
        return spec

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self.layers)

    def kind_census(self) -> dict:
        """Count of layers per kind."""
        census: dict = {}
        for spec in self.layers:
            census[spec.kind] = census.get(spec.kind, 0) + 1
        return census

    def input_shape(self) -> tuple:
        return tuple(self.layers[0].shape)

    def activation_shapes(self) -> dict:
        """Output shape of every layer, computed from the input shape."""
        shapes: dict = {}
        current = tuple(self.layers[0].shape)
        for spec in self.layers:
            if spec.kind == "input":
                pass
            elif spec.kind == "conv":
                c, h, w = current
                if c % spec.groups != 0:
                    raise ModelError(
                        f"layer {spec.name!r}: {c} input channels not divisible by {spec.groups} groups"
                    )
                oh = ops.conv_output_size(h, spec.kernel, spec.stride, spec.pad)
                ow = ops.conv_output_size(w, spec.kernel, spec.stride, spec.pad)
                current = (spec.filters, oh, ow)
            elif spec.kind == "maxpool":
                c, h, w = current
                oh = (h - spec.kernel) // spec.stride + 1
                ow = (w - spec.kernel) // spec.stride + 1
                current = (c, oh, ow)
            elif spec.kind == "fc":
                current = (spec.width,)
            elif spec.kind in ("relu", "lrn", "dropout", "softmax", "output"):
                pass
            shapes[spec.name] = current
        return shapes

    def parameter_shapes(self) -> dict:
        """Expected {layer: (weight shape, bias shape)} for conv/fc layers."""
        shapes = self.activation_shapes()
        out: dict = {}
        current = tuple(self.layers[0].shape)
        for spec in self.layers:
            if spec.kind == "conv":
                c = current[0]
                out[spec.name] = (
                    (spec.filters, c // spec.groups, spec.kernel, spec.kernel),
                    (spec.filters,),
                )
            elif spec.kind == "fc":
                n_in = int(np.prod(current))
                out[spec.name] = ((spec.width, n_in), (spec.width,))
            current = shapes[spec.name]
        return out


@dataclass
class FeatureVector:
    """A 4096-dimensional feature row tied to its source image."""

    values: np.ndarray
    source_image_id: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32).reshape(-1)
        if arr.shape != (FEATURE_DIM,):
            raise ShapeError(
                "feature vector has the wrong length",
                dimension="values",
                expected=FEATURE_DIM,
                found=arr.size,
            )
        self.values = arr


# LRN constants shared by both normalization layers.
_LRN = dict(k=1.0, n=5, alpha=1e-4, beta=0.75)


def builtin_alexnet_graph() -> NetworkGraph:
    """The canonical 25-layer stack with the fc7 feature tap."""
    layers = [
        LayerSpec("input", "input", shape=(3, 227, 227)),
        LayerSpec("conv1", "conv", filters=96, kernel=11, stride=4, pad=0, groups=1),
        LayerSpec("relu1", "relu"),
        LayerSpec("norm1", "lrn", **_LRN),
        LayerSpec("pool1", "maxpool", kernel=3, stride=2),
        LayerSpec("conv2", "conv", filters=256, kernel=5, stride=1, pad=2, groups=2),
        LayerSpec("relu2", "relu"),
        LayerSpec("norm2", "lrn", **_LRN),
        LayerSpec("pool2", "maxpool", kernel=3, stride=2),
        LayerSpec("conv3", "conv", filters=384, kernel=3, stride=1, pad=1, groups=1),
        LayerSpec("relu3", "relu"),
        LayerSpec("conv4", "conv", filters=384, kernel=3, stride=1, pad=1, groups=2),
        LayerSpec("relu4", "relu"),
        LayerSpec("conv5", "conv", filters=256, kernel=3, stride=1, pad=1, groups=2),
        LayerSpec("relu5", "relu"),
        LayerSpec("pool5", "maxpool", kernel=3, stride=2),
        LayerSpec("fc6", "fc", width=4096),
        LayerSpec("relu6", "relu"),
        LayerSpec("drop6", "dropout"),
        LayerSpec("fc7", "fc", width=4096),
        LayerSpec("relu7", "relu"),
        LayerSpec("drop7", "dropout"),
        LayerSpec("fc8", "fc", width=1000),
        LayerSpec("prob", "softmax"),
        LayerSpec("output", "output"),
    ]
    return NetworkGraph(layers=layers, feature_tap="fc7")


def forward(graph: NetworkGraph, bundle, x, stop_at: str = None, on_layer=None) -> dict:
    """Run the stack on one input, returning every computed activation.

    Stops after the layer named by stop_at when given. The optional
    on_layer callback receives each layer name as it is evaluated; it
    exists so tests can observe which layers actually ran.
    """
    x = ops.as_tensor(x, 3)
    want = graph.input_shape()
    if x.shape != want:
        raise ShapeError(
            "input does not match the graph input layer",
            dimension="input",
            expected=want,
            found=x.shape,
        )
    if stop_at is not None and stop_at not in graph:
        raise ModelError(f"stopAt names no layer in the graph: {stop_at!r}")

    activations: dict = {}
    current = x
    for spec in graph.layers:
        if on_layer is not None:
            on_layer(spec.name)
        if spec.kind == "input":
            current = x
        elif spec.kind == "conv":
            current = ops.conv2d(
                current,
                bundle.weights(spec.name),
                bundle.bias(spec.name),
                stride=spec.stride,
                pad=spec.pad,
                groups=spec.groups,
            )
        elif spec.kind == "relu":
            current = ops.relu(current)
        elif spec.kind == "lrn":
            current = ops.lrn(current, k=spec.k, n=spec.n, alpha=spec.alpha, beta=spec.beta)
        elif spec.kind == "maxpool":
            current = ops.maxpool(current, size=spec.kernel, stride=spec.stride)
        elif spec.kind == "fc":
            current = ops.fully_connected(
                current, bundle.weights(spec.name), bundle.bias(spec.name)
            )
        elif spec.kind == "dropout":
            current = ops.dropout_inference(current)
        elif spec.kind == "softmax":
            current = ops.softmax(current)
        else:  # output
            pass
        activations[spec.name] = current
        if spec.name == stop_at:
            break
    return activations


def extract_features(graph: NetworkGraph, bundle, x, *, image_id: str = "") -> FeatureVector:
    """The linear (pre-ReLU) output of the feature-tap layer.

    The tap layer itself is the fc layer, so stopping there yields the
    activation before the following ReLU runs.
    """
    acts = forward(graph, bundle, x, stop_at=graph.feature_tap)
    return FeatureVector(values=acts[graph.feature_tap], source_image_id=image_id)


MONTAGE_COLS = 12
MONTAGE_ROWS = 8


def conv1_montage(bundle) -> Raster:
    """Render the 96 first-layer filters as a 12x8 tile grid.

    Each 3x11x11 filter becomes an 11x11 RGB tile, min-max normalized
    to [0, 255] over the whole filter; a filter with zero range renders
    as uniform mid-gray (128). Tiles are separated by one black pixel,
    with no outer border.
    """
    w = np.asarray(bundle.weights("conv1"), dtype=np.float64)
    filters, channels, kh, kw = w.shape
    if (channels, kh, kw) != (3, 11, 11) or filters != MONTAGE_COLS * MONTAGE_ROWS:
        raise ShapeError(
            "conv1 weights do not match the montage layout",
            dimension="conv1",
            expected=(96, 3, 11, 11),
            found=w.shape,
        )
    out_w = MONTAGE_COLS * kw + (MONTAGE_COLS - 1)
    out_h = MONTAGE_ROWS * kh + (MONTAGE_ROWS - 1)
    canvas = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    for idx in range(filters):
        row, col = divmod(idx, MONTAGE_COLS)
        tile = w[idx]
        lo = tile.min()
        hi = tile.max()
        if hi > lo:
            scaled = (tile - lo) * (255.0 / (hi - lo))
            pixels = np.floor(scaled + 0.5).astype(np.uint8)
        else:
            pixels = np.full_like(tile, 128.0).astype(np.uint8)
        y0 = row * (kh + 1)
        x0 = col * (kw + 1)
        canvas[y0 : y0 + kh, x0 : x0 + kw, :] = pixels.transpose(1, 2, 0)
    return Raster(width=out_w, height=out_h, pixels=canvas)
