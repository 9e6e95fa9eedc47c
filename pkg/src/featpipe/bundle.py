"""Weight-bundle storage: manifest.json plus a flat weights.bin blob.

The manifest lists every tensor with its layer, role, shape, byte
offset, and crc32; the blob holds little-endian float32 values. A
bundle loads only if every conv/fc layer of the built-in graph is
present with exactly the expected shape and every checksum matches.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import BundleError
from .graph import NetworkGraph, builtin_alexnet_graph

MANIFEST_NAME = "manifest.json"
BLOB_NAME = "weights.bin"
_ROLES = ("weights", "bias")


@dataclass
class WeightBundle:
    """Validated parameters for every learnable layer of a graph."""

    tensors: dict
    provenance: str = ""
    _graph: NetworkGraph = field(default=None, repr=False)

    def weights(self, layer: str) -> np.ndarray:
        return self.tensors[layer]["weights"]

    def bias(self, layer: str) -> np.ndarray:
        return self.tensors[layer]["bias"]

    def layers(self) -> list:
        return list(self.tensors)


def _expected_shapes(graph: NetworkGraph) -> dict:
    expected = {}
    for layer, (w_shape, b_shape) in graph.parameter_shapes().items():
        expected[(layer, "weights")] = w_shape
        expected[(layer, "bias")] = b_shape
    return expected


def validate_bundle(bundle: WeightBundle, graph: NetworkGraph = None) -> None:
    """Check every learnable layer is present with the demanded shape."""
    graph = graph or builtin_alexnet_graph()
    expected = _expected_shapes(graph)
    missing = []
    for (layer, role), shape in sorted(expected.items()):
        entry = bundle.tensors.get(layer, {})
        if role not in entry:
            missing.append(f"{layer}/{role}")
            continue
        found = tuple(entry[role].shape)
        if found != shape:
            raise BundleError(
                f"layer {layer!r} {role} shape mismatch: expected {shape}, found {found}"
            )
    if missing:
        layers = sorted({name.split("/")[0] for name in missing})
        raise BundleError(
            "bundle is missing entries for layers: " + ", ".join(layers)
        )
    extra = [
        (layer, role)
        for layer, entry in bundle.tensors.items()
        for role in entry
        if (layer, role) not in expected
    ]
    if extra:
        names = ", ".join(f"{layer}/{role}" for layer, role in sorted(extra))
        raise BundleError(f"bundle has entries for unknown tensors: {names}")


def load_bundle(manifest_path: str, graph: NetworkGraph = None) -> WeightBundle:
    """Load and validate a bundle from its manifest path.

    The blob is expected as weights.bin next to the manifest. Raises
    BundleError for missing tensors, shape mismatches, short blobs,
    and checksum failures.
    """
    graph = graph or builtin_alexnet_graph()
    # A bundle is normally referenced by its directory; accept the
    # manifest file itself too. A missing bundle reports the manifest
    # path it looked for.
    if os.path.basename(manifest_path) != MANIFEST_NAME and not os.path.isfile(manifest_path):
        manifest_path = os.path.join(manifest_path, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
    except OSError as exc:
        raise BundleError(f"cannot read manifest {manifest_path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BundleError(f"manifest {manifest_path!r} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or "tensors" not in manifest:
        raise BundleError(f"manifest {manifest_path!r} lacks a tensors list")

    blob_path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), BLOB_NAME)
    try:
        with open(blob_path, "rb") as handle:
            blob = handle.read()
    except OSError as exc:
        raise BundleError(f"cannot read blob {blob_path!r}: {exc}") from exc

    tensors: dict = {}
    for entry in manifest["tensors"]:
        layer = entry.get("layer")
        role = entry.get("role")
        if not layer or role not in _ROLES:
            raise BundleError(f"manifest entry has bad layer/role: {entry!r}")
        dtype = entry.get("dtype")
        if dtype != "f32le":
            raise BundleError(f"layer {layer!r} {role}: unsupported dtype {dtype!r}")
        shape = tuple(int(d) for d in entry.get("shape", ()))
        if not shape or any(d <= 0 for d in shape):
            raise BundleError(f"layer {layer!r} {role}: bad shape {shape}")
        offset = int(entry.get("offset", -1))
        nbytes = 4 * int(np.prod(shape))
        if offset < 0 or offset + nbytes > len(blob):
            raise BundleError(
                f"layer {layer!r} {role}: blob too short "
                f"(need bytes [{offset}, {offset + nbytes}), blob has {len(blob)})"
            )
        raw = blob[offset : offset + nbytes]
        stated = str(entry.get("crc32", "")).lower()
        actual = format(zlib.crc32(raw) & 0xFFFFFFFF, "08x")
        if stated != actual:
            raise BundleError(
                f"layer {layer!r} {role}: checksum mismatch (manifest {stated}, blob {actual})"
            )
        if layer in tensors and role in tensors[layer]:
            raise BundleError(f"layer {layer!r} {role}: duplicate manifest entry")
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        tensors.setdefault(layer, {})[role] = np.ascontiguousarray(arr, dtype=np.float32)

    bundle = WeightBundle(
        tensors=tensors,
        provenance=str(manifest.get("provenance", "")),
        _graph=graph,
    )
    validate_bundle(bundle, graph)
    return bundle


def write_bundle(bundle: WeightBundle, out_dir: str) -> str:
    """Write manifest.json and weights.bin; returns the manifest path.

    Tensors are laid out in sorted (layer, role) order so the same
    bundle always produces byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for layer in sorted(bundle.tensors):
        for role in _ROLES:
            if role not in bundle.tensors[layer]:
                continue
            arr = np.ascontiguousarray(bundle.tensors[layer][role], dtype="<f4")
            raw = arr.tobytes()
            entries.append(
                {
                    "layer": layer,
                    "role": role,
                    "shape": list(arr.shape),
                    "dtype": "f32le",
                    "offset": offset,
                    "crc32": format(zlib.crc32(raw) & 0xFFFFFFFF, "08x"),
                }
            )
            chunks.append(raw)
            offset += len(raw)
    manifest = {"provenance": bundle.provenance, "tensors": entries}
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    with open(os.path.join(out_dir, BLOB_NAME), "wb") as handle:
        handle.write(b"".join(chunks))
    with open(manifest_path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")
    return manifest_path


def random_bundle(seed: int = 0, graph: NetworkGraph = None, provenance: str = "") -> WeightBundle:
    """A seeded random bundle with sanely scaled weights.

    Weights are normal with deviation 1/sqrt(fan-in) so activations
    stay in a workable range through the whole stack; biases are zero.
    """
    graph = graph or builtin_alexnet_graph()
    rng = np.random.default_rng(seed)
    tensors: dict = {}
    for layer, (w_shape, b_shape) in graph.parameter_shapes().items():
        fan_in = int(np.prod(w_shape[1:]))
        scale = 1.0 / np.sqrt(fan_in)
        tensors[layer] = {
            "weights": rng.normal(0.0, scale, size=w_shape).astype(np.float32),
            "bias": np.zeros(b_shape, dtype=np.float32),
        }
    label = provenance or f"random(seed={seed})"
    return WeightBundle(tensors=tensors, provenance=label, _graph=graph)
