"""Seeded random-search tuning of the SVM hyperparameters.

The search samples C (and gamma for rbf kernels) log-uniformly from
the configured ranges, scoring each draw with stratified k-fold
cross-validated error. The default configuration (C=1, gamma=1/dim)
is forced in as evaluation #1 so the winner can never lose to it. The
per-evaluation incumbent trace mirrors the familiar minimum-objective
curve and exports to CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import svm
from .errors import ConfigError, DataError
from .svm import KernelSpec

KNOWN_KERNELS = ("linear", "rbf")


@dataclass(frozen=True)
class SvmParams:
    """One candidate configuration drawn by the tuner."""

    C: float
    kernel: str
    gamma: float = None

    def __post_init__(self):
        if self.C <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        if self.kernel not in KNOWN_KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "rbf" and (self.gamma is None or self.gamma <= 0):
            raise ConfigError("rbf parameters need gamma > 0")

    def kernel_spec(self) -> KernelSpec:
        if self.kernel == "rbf":
            return KernelSpec("rbf", self.gamma)
        return KernelSpec("linear")


@dataclass(frozen=True)
class SearchSpace:
    """Log-uniform ranges for C and gamma plus the kernel families."""

    c_range: tuple = (1e-3, 1e3)
    gamma_range: tuple = (1e-6, 1e1)
    kernels: tuple = ("rbf",)

    def __post_init__(self):
        for name, (lo, hi) in (("C", self.c_range), ("gamma", self.gamma_range)):
            if not (0 < lo < hi):
                raise ConfigError(
                    f"{name} range must satisfy 0 < lower < upper, got ({lo}, {hi})"
                )
        if not self.kernels:
            raise ConfigError("search space needs at least one kernel kind")
        for kind in self.kernels:
            if kind not in KNOWN_KERNELS:
                raise ConfigError(f"unknown kernel {kind!r} in search space")


@dataclass(frozen=True)
class TuneRecord:
    """One evaluation: the draw, its objective, and the incumbent."""

    index: int
    params: SvmParams
    objective: float
    incumbent_objective: float


@dataclass
class TuneTrace:
    """The full evaluation history plus the winning configuration."""

    records: list
    winner: SvmParams

    def __post_init__(self):
        previous = math.inf
        for rec in self.records:
            if rec.incumbent_objective > previous + 1e-15:
                raise ConfigError(
                    f"incumbent rose at evaluation {rec.index}; trace is inconsistent"
                )
            previous = rec.incumbent_objective

    def final_incumbent(self) -> float:
        return self.records[-1].incumbent_objective

    def __len__(self) -> int:
        return len(self.records)


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample: seeded shuffle within each class, then
    round-robin so every fold sees both classes."""
    assignment = np.full(y.shape[0], -1, dtype=np.intp)
    rng = np.random.default_rng(seed)
    for cls in (1.0, -1.0):
        members = np.flatnonzero(y == cls)
        if members.size < folds:
            raise DataError(
                f"class {int(cls):+d} has {members.size} members, "
                f"fewer than {folds} folds"
            )
        perm = rng.permutation(members)
        assignment[perm] = np.arange(perm.size) % folds
    return assignment


def cv_objective(x, y, params: SvmParams, folds: int = 5, seed: int = 0) -> float:
    """Stratified k-fold misclassification rate in [0, 1]."""
    if folds < 2:
        raise DataError(f"cross-validation needs at least 2 folds, got {folds}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    assignment = _stratified_folds(y, folds, seed)
    spec = params.kernel_spec()
    rates = []
    for fold in range(folds):
        val = assignment == fold
        train = ~val
        model = svm.smo_train(x[train], y[train], C=params.C, kernel=spec)
        values = svm.decision_values(model, x[val])
        predicted = np.where(values >= 0, 1.0, -1.0)
        rates.append(float(np.mean(predicted != y[val])))
    return float(np.mean(rates))


def default_params(dim: int, space: SearchSpace) -> SvmParams:
    """The forced first evaluation: C=1 with gamma=1/dim when rbf is
    in play, plain C=1 otherwise."""
    if "rbf" in space.kernels:
        return SvmParams(C=1.0, kernel="rbf", gamma=1.0 / dim)
    return SvmParams(C=1.0, kernel="linear")


def _sample_params(space: SearchSpace, rng: np.random.Generator) -> SvmParams:
    kernel = space.kernels[int(rng.integers(len(space.kernels)))]
    c_lo, c_hi = space.c_range
    c_val = float(np.exp(rng.uniform(np.log(c_lo), np.log(c_hi))))
    if kernel == "rbf":
        g_lo, g_hi = space.gamma_range
        gamma = float(np.exp(rng.uniform(np.log(g_lo), np.log(g_hi))))
        return SvmParams(C=c_val, kernel="rbf", gamma=gamma)
    return SvmParams(C=c_val, kernel="linear")


def optimize(
    space: SearchSpace,
    x,
    y,
    budget: int = 30,
    seed: int = 0,
    folds: int = 5,
):
    """Random search over the space; returns (winner, trace).

    Evaluation #1 is always the default configuration; the remaining
    budget-1 draws are seeded log-uniform samples. Ties go to the
    earliest evaluation.
    """
    if budget < 1:
        raise ConfigError(f"budget must be at least 1, got {budget}")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    candidates = [default_params(x.shape[1], space)]
    while len(candidates) < budget:
        candidates.append(_sample_params(space, rng))

    records = []
    best_objective = math.inf
    winner = candidates[0]
    for index, params in enumerate(candidates, start=1):
        objective = cv_objective(x, y, params, folds=folds, seed=seed)
        if objective < best_objective:
            best_objective = objective
            winner = params
        records.append(
            TuneRecord(
                index=index,
                params=params,
                objective=objective,
                incumbent_objective=best_objective,
            )
        )
    return winner, TuneTrace(records=records, winner=winner)


TRACE_HEADER = ("eval_index", "C", "gamma", "kernel", "objective", "incumbent")


def write_trace_csv(trace: TuneTrace, path: str) -> None:
    """Export the trace as `eval_index,C,gamma,kernel,objective,incumbent`.

    The gamma column is blank for linear draws.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER)
        for rec in trace.records:
            gamma = "" if rec.params.gamma is None else format(rec.params.gamma, ".9g")
            writer.writerow(
                [
                    rec.index,
                    format(rec.params.C, ".9g"),
                    gamma,
                    rec.params.kernel,
                    format(rec.objective, ".9g"),
                    format(rec.incumbent_objective, ".9g"),
                ]
            )


def read_trace_csv(path: str) -> list:
    """Parse a trace CSV back into row dicts (used by the renderers)."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        rows = list(reader)
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise DataError(f"trace file {path!r} lacks the expected header")
    out = []
    for row in rows[1:]:
        if len(row) != len(TRACE_HEADER):
            raise DataError(f"trace file {path!r} has a malformed row: {row!r}")
        out.append(
            {
                "eval_index": int(row[0]),
                "C": float(row[1]),
                "gamma": float(row[2]) if row[2] else None,
                "kernel": row[3],
                "objective": float(row[4]),
                "incumbent": float(row[5]),
            }
        )
    return out
