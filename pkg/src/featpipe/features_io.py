"""Reading and writing extracted-feature files.

The canonical format is CSV with a header `image_id,label,f0,...,fN`;
one row per image. Values are written with nine significant digits,
which round-trips float32 feature components exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class FeatureRecord:
    """One image's identifier, label, and feature vector."""

    image_id: str
    label: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise DataError(f"feature record {self.image_id!r} has no values")
        object.__setattr__(self, "values", values)


def write_features(records, path: str) -> None:
    records = list(records)
    if not records:
        raise DataError("no feature records to write")
    width = records[0].values.shape[0]
    header = ["image_id", "label"] + [f"f{i}" for i in range(width)]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for rec in records:
            if rec.values.shape[0] != width:
                raise DataError(
                    f"feature record {rec.image_id!r} has {rec.values.shape[0]} "
                    f"values; expected {width}"
                )
            writer.writerow(
                [rec.image_id, rec.label] + [format(v, ".9g") for v in rec.values]
            )


def read_features(path: str) -> list:
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read feature file {path!r}: {exc}") from exc
    if not rows:
        raise DataError(f"feature file {path!r} is empty")
    header = rows[0]
    width = len(header) - 2
    expected = ["image_id", "label"] + [f"f{i}" for i in range(width)]
    if width < 1 or header != expected:
        raise DataError(f"feature file {path!r} has an unrecognized header")
    records = []
    for row_number, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"feature file {path!r} row {row_number}: expected "
                f"{len(header)} fields, found {len(row)}"
            )
        try:
            values = np.array([float(v) for v in row[2:]], dtype=np.float64)
        except ValueError as exc:
            raise DataError(
                f"feature file {path!r} row {row_number}: {exc}"
            ) from exc
        if not np.all(np.isfinite(values)):
            raise DataError(
                f"feature file {path!r} row {row_number} contains non-finite values"
            )
        records.append(FeatureRecord(image_id=row[0], label=row[1], values=values))
    if not records:
        raise DataError(f"feature file {path!r} has no data rows")
    return records
