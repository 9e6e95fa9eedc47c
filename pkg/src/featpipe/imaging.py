"""Image decoding, resizing, and input-tensor preparation.

Decoded images live in a small ``Raster`` container (8-bit RGB, row
major). Resizing uses half-pixel-centered bilinear sampling written out
by hand so the arithmetic is pinned down exactly; decoding itself is
delegated to Pillow. The dataset side of the module reads manifest CSV
files mapping image paths to class labels.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, DecodeError, ShapeError

# Network input geometry and the per-channel means subtracted before
# inference. The means are the usual ImageNet RGB averages; they can be
# overridden (or zeroed) through configuration.
INPUT_WIDTH = 227
INPUT_HEIGHT = 227
DEFAULT_MEAN = (123.68, 116.78, 103.94)


@dataclass
class Raster:
    """An 8-bit RGB image, pixels row major with interleaved channels."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ShapeError(
                "raster dimensions must be positive",
                dimension="size",
                expected="width, height >= 1",
                found=f"{self.width}x{self.height}",
            )
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        expected = (self.height, self.width, 3)
        if arr.size == 3 * self.width * self.height:
            arr = arr.reshape(expected)
        if arr.shape != expected:
            raise ShapeError(
                "pixel buffer does not match raster dimensions",
                dimension="pixels",
                expected=f"{3 * self.width * self.height} bytes",
                found=f"{arr.size} bytes",
            )
        self.pixels = arr

    def tobytes(self) -> bytes:
        """Flat row-major RGB bytes, 3 per pixel."""
        return self.pixels.tobytes()


@dataclass(frozen=True)
class ManifestRecord:
    """One labeled image: resolved path, class label, optional split."""

    path: str
    label: str
    split: str | None = None


@dataclass
class DatasetManifest:
    """A validated list of labeled images with exactly two classes."""

    records: list[ManifestRecord]
    classes: tuple[str, str]
    source: str = ""
    _counts: dict = field(default_factory=dict, repr=False)

    def counts(self) -> dict:
        """Number of records per class label."""
        if not self._counts:
            out = {name: 0 for name in self.classes}
            for rec in self.records:
                out[rec.label] += 1
            self._counts = out
        return dict(self._counts)

    def subset(self, split: str) -> list[ManifestRecord]:
        """Records whose split column equals the given name."""
        return [rec for rec in self.records if rec.split == split]

    def __len__(self) -> int:
        return len(self.records)


def decode_image(data: bytes, *, source: str = "<bytes>") -> Raster:
    """Decode a PNG or JPEG byte stream into an RGB raster.

    Grayscale images are replicated across the three channels and any
    alpha channel is dropped. Corrupt or unsupported data raises
    DecodeError carrying the source name.
    """
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image ({exc})", path=source) from exc
    height, width = arr.shape[0], arr.shape[1]
    return Raster(width=width, height=height, pixels=arr)


def read_image(path: str) -> Raster:
    """Read and decode an image file, reporting the path on failure."""
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise DecodeError(f"cannot read image ({exc})", path=str(path)) from exc
    return decode_image(data, source=str(path))


def encode_png(raster: Raster) -> bytes:
    """Encode a raster as a PNG byte stream (lossless round trip)."""
    img = Image.fromarray(raster.pixels, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def resize_bilinear(raster: Raster, out_w: int, out_h: int) -> Raster:
    """Resize with half-pixel-centered bilinear interpolation.

    The aspect ratio is not preserved; the image is stretched to the
    requested size. Source coordinates are (o + 0.5) * scale - 0.5 with
    neighbor indices clamped at the borders, and the blended value is
    rounded to the nearest integer (half up).
    """
    if out_w < 1 or out_h < 1:
        raise ShapeError(
            "target dimensions must be positive",
            dimension="size",
            expected="out_w, out_h >= 1",
            found=f"{out_w}x{out_h}",
        )
    if out_w == raster.width and out_h == raster.height:
        return Raster(raster.width, raster.height, raster.pixels.copy())

    src = raster.pixels.astype(np.float64)
    src_x = (np.arange(out_w, dtype=np.float64) + 0.5) * (raster.width / out_w) - 0.5
    src_y = (np.arange(out_h, dtype=np.float64) + 0.5) * (raster.height / out_h) - 0.5
    x0 = np.floor(src_x)
    y0 = np.floor(src_y)
    fx = src_x - x0
    fy = src_y - y0
    x0c = np.clip(x0, 0, raster.width - 1).astype(np.intp)
    x1c = np.clip(x0 + 1, 0, raster.width - 1).astype(np.intp)
    y0c = np.clip(y0, 0, raster.height - 1).astype(np.intp)
    y1c = np.clip(y0 + 1, 0, raster.height - 1).astype(np.intp)

    # Blend rows first, then columns; broadcasting keeps this readable.
    fx = fx[np.newaxis, :, np.newaxis]
    fy = fy[:, np.newaxis, np.newaxis]
    row0 = src[y0c]
    row1 = src[y1c]
    top = row0[:, x0c] * (1.0 - fx) + row0[:, x1c] * fx
    bottom = row1[:, x0c] * (1.0 - fx) + row1[:, x1c] * fx
    blended = top * (1.0 - fy) + bottom * fy
    out = np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)
    return Raster(width=out_w, height=out_h, pixels=out)


def to_input_tensor(raster: Raster, mean=DEFAULT_MEAN) -> np.ndarray:
    """Convert a 227x227 raster to the network input tensor.

    Returns a channel-major 3x227x227 float32 array of pixel values
    minus the per-channel mean, channels ordered RGB.
    """
    if raster.width != INPUT_WIDTH or raster.height != INPUT_HEIGHT:
        raise ShapeError(
            "input raster has the wrong size",
            dimension="size",
            expected=f"{INPUT_WIDTH}x{INPUT_HEIGHT}",
            found=f"{raster.width}x{raster.height}",
        )
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (3,):
        raise ShapeError(
            "mean must have one entry per channel",
            dimension="mean",
            expected="3 values",
            found=f"shape {mean.shape}",
        )
    shifted = raster.pixels.astype(np.float64) - mean[np.newaxis, np.newaxis, :]
    return np.ascontiguousarray(shifted.transpose(2, 0, 1), dtype=np.float32)


def raster_of(tensor: np.ndarray, mean=DEFAULT_MEAN) -> Raster:
    """Inverse of to_input_tensor up to uint8 rounding and clipping."""
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ShapeError(
            "tensor must be channel-major RGB",
            dimension="channels",
            expected=3,
            found=arr.shape[0] if arr.ndim == 3 else f"rank {arr.ndim}",
        )
    mean = np.asarray(mean, dtype=np.float64)
    pixels = arr.transpose(1, 2, 0) + mean[np.newaxis, np.newaxis, :]
    pixels = np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.uint8)
    return Raster(width=arr.shape[2], height=arr.shape[1], pixels=pixels)


MANIFEST_HEADER = ("path", "label", "split")
_SPLITS = ("train", "test")


def load_manifest(path: str, *, classes: tuple[str, str] = ("hookah", "nonhookah")) -> DatasetManifest:
    """Read and validate a `path,label,split` manifest CSV.

    Relative image paths are resolved against the manifest's directory.
    Rejects unknown labels, duplicate paths, bad split values, and
    files with no data rows; errors name the offending row.
    """
    if len(set(classes)) != 2:
        raise DataError(f"expected exactly two distinct class names, got {classes!r}")
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read manifest {path!r}: {exc}") from exc
    if not rows:
        raise DataError(f"manifest {path!r} is empty")
    header = tuple(cell.strip() for cell in rows[0])
    if header != MANIFEST_HEADER:
        raise DataError(
            f"manifest {path!r} has header {header!r}, expected {MANIFEST_HEADER!r}"
        )
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    for idx, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise DataError(f"manifest {path!r} row {idx}: expected 3 columns, got {len(row)}")
        raw_path, label, split = (cell.strip() for cell in row)
        if not raw_path:
            raise DataError(f"manifest {path!r} row {idx}: empty path")
        if label not in classes:
            raise DataError(
                f"manifest {path!r} row {idx}: unknown label {label!r}, expected one of {list(classes)}"
            )
        if split and split not in _SPLITS:
            raise DataError(
                f"manifest {path!r} row {idx}: unknown split {split!r}, expected one of {list(_SPLITS)}"
            )
        resolved = raw_path if os.path.isabs(raw_path) else os.path.join(base, raw_path)
        if resolved in seen:
            raise DataError(f"manifest {path!r} row {idx}: duplicate path {raw_path!r}")
        seen.add(resolved)
        records.append(ManifestRecord(path=resolved, label=label, split=split or None))
    if not records:
        raise DataError(f"manifest {path!r} has no data rows")
    return DatasetManifest(records=records, classes=tuple(classes), source=str(path))
