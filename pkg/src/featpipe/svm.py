"""Binary kernel SVM trained by sequential minimal optimization.

The solver is the classic two-variable working-set method with
max-violating-pair selection. It minimizes the dual
f(a) = 1/2 aᵀQa - eᵀa with Q = yyᵀ∘K subject to 0 <= a_i <= C and
Σ a_i y_i = 0, stopping when the maximal KKT violation drops below
tol. Trained models serialize to a canonical JSON form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ModelError, ShapeError

SUPPORT_EPS = 1e-8
COEF_SLACK = 1e-9
BALANCE_TOL = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameter: linear, or rbf with gamma."""

    kind: str
    gamma: float = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ModelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not (self.gamma > 0):
                raise ModelError("rbf kernel requires gamma > 0")


def kernel_eval(kernel: KernelSpec, x, y) -> float:
    """Evaluate the kernel on a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ShapeError(
            "kernel arguments differ in length",
            dimension="length",
            expected=x.shape[0],
            found=y.shape[0],
        )
    if kernel.kind == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp(-kernel.gamma * (diff @ diff)))


def kernel_matrix(kernel: KernelSpec, a, b=None) -> np.ndarray:
    """Pairwise kernel values between the rows of a and b."""
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(
            "kernel matrix arguments differ in feature length",
            dimension="columns",
            expected=a.shape[1] if a.ndim == 2 else "2-d array",
            found=b.shape[1] if b.ndim == 2 else "2-d array",
        )
    gram = a @ b.T
    if kernel.kind == "linear":
        return gram
    sq_a = np.sum(a * a, axis=1)[:, np.newaxis]
    sq_b = np.sum(b * b, axis=1)[np.newaxis, :]
    dist = np.maximum(sq_a + sq_b - 2.0 * gram, 0.0)
    return np.exp(-kernel.gamma * dist)


@dataclass
class SvmModel:
    """A trained classifier: support vectors, dual coefficients, bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    class_map: dict
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sv = np.ascontiguousarray(self.support_vectors, dtype=np.float64)
        coefs = np.ascontiguousarray(self.dual_coefs, dtype=np.float64).reshape(-1)
        if sv.ndim != 2 or sv.shape[0] == 0:
            raise ModelError("model must carry at least one support vector")
        if coefs.shape[0] != sv.shape[0]:
            raise ModelError(
                f"dual coefficient count {coefs.shape[0]} does not match "
                f"{sv.shape[0]} support vectors"
            )
        if set(self.class_map) != {1, -1}:
            raise ModelError("class map must cover exactly the labels +1 and -1")
        balance = abs(float(coefs.sum()))
        if balance > BALANCE_TOL:
            raise ModelError(f"dual coefficients sum to {balance:.3e}, expected 0")
        c_box = float(self.training_meta.get("C", np.inf))
        if np.any(np.abs(coefs) > c_box + COEF_SLACK):
            raise ModelError("a dual coefficient exceeds the box constraint C")
        self.support_vectors = sv
        self.dual_coefs = coefs
        self.bias = float(self.bias)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]


def _validate_training_input(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2:
        raise DataError("training features must form a 2-d array")
    if x.shape[0] != y.shape[0]:
        raise DataError(
            f"feature rows ({x.shape[0]}) and labels ({y.shape[0]}) differ in count"
        )
    if x.shape[0] < 2:
        raise DataError("training needs at least two points")
    if not np.all(np.isfinite(x)):
        raise DataError("training features contain non-finite values")
    labels = set(np.unique(y))
    if labels != {-1.0, 1.0}:
        if labels <= {-1.0} or labels <= {1.0}:
            raise DataError("training labels cover only a single class")
        raise DataError(f"labels must be -1 or +1, found {sorted(labels)}")
    return x, y


def smo_train(
    x,
    y,
    *,
    C: float = 1.0,
    kernel: KernelSpec = None,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    class_map: dict = None,
) -> SvmModel:
    """Train a binary SVM with max-violating-pair SMO.

    Labels must be -1/+1. The solver itself is deterministic; the seed
    is accepted for interface stability and recorded nowhere. The
    iteration budget is max_passes * max(1000, 10n); exceeding it
    raises, since the criteria below it guarantee KKT-tol optimality.
    """
    if C <= 0:
        raise DataError(f"box constraint C must be positive, got {C}")
    kernel = kernel or KernelSpec("linear")
    x, y = _validate_training_input(x, y)
    n = x.shape[0]
    k = kernel_matrix(kernel, x)

    alpha = np.zeros(n, dtype=np.float64)
    # f_i = y_i - u_i where u_i is the biasless decision value; the
    # max-violating pair maximizes f over I_up and minimizes over I_low.
    f = y.copy()
    budget = max_passes * max(1000, 10 * n)
    iterations = 0
    m_hat = np.inf
    big_m_hat = -np.inf
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        f_up = np.where(up, f, -np.inf)
        f_low = np.where(low, f, np.inf)
        i = int(np.argmax(f_up))
        j = int(np.argmin(f_low))
        m_hat = f_up[i]
        big_m_hat = f_low[j]
        if m_hat - big_m_hat <= tol:
            break
        if iterations >= budget:
            raise ModelError(
                f"SMO failed to converge within {budget} iterations "
                f"(gap {m_hat - big_m_hat:.3e}, tol {tol:g})"
            )
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        if eta <= 0:
            eta = 1e-12
        t = (m_hat - big_m_hat) / eta
        # Box limits along the direction: alpha_i moves by y_i * t,
        # alpha_j by -y_j * t.
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, room_i, room_j)
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        f -= t * (k[:, i] - k[:, j])
        iterations += 1

    free = (alpha > SUPPORT_EPS) & (alpha < C - SUPPORT_EPS)
    if free.any():
        bias = float(np.mean(f[free]))
    elif np.isfinite(m_hat) and np.isfinite(big_m_hat):
        bias = float((m_hat + big_m_hat) / 2.0)
    else:
        bias = 0.0

    keep = alpha > SUPPORT_EPS
    if not keep.any():
        # Everything optimized to zero; retain the first point of each
        # class so the model stays well formed (decision value 0).
        keep = np.zeros(n, dtype=bool)
        keep[int(np.argmax(y > 0))] = True
        keep[int(np.argmax(y < 0))] = True
    coefs = alpha[keep] * y[keep]
    # Dropping sub-threshold multipliers can leave a tiny imbalance in
    # the equality constraint; push it into the largest coefficient.
    residual = coefs.sum()
    if residual != 0.0:
        idx = int(np.argmax(np.abs(coefs)))
        adjusted = coefs[idx] - residual
        if abs(adjusted) <= C:
            coefs[idx] = adjusted

    class_map = dict(class_map) if class_map else {1: "+1", -1: "-1"}
    return SvmModel(
        support_vectors=x[keep],
        dual_coefs=coefs,
        bias=bias,
        kernel=kernel,
        class_map=class_map,
        training_meta={"C": float(C), "tol": float(tol), "iterations": iterations},
    )


def decision_value(model: SvmModel, x) -> float:
    """The signed distance proxy: sum of coef * K(sv, x) plus bias."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.support_vectors.shape[1]:
        raise ShapeError(
            "probe length does not match the support vectors",
            dimension="length",
            expected=model.support_vectors.shape[1],
            found=x.shape[0],
        )
    row = kernel_matrix(model.kernel, x[np.newaxis, :], model.support_vectors)
    return float(row[0] @ model.dual_coefs + model.bias)


def decision_values(model: SvmModel, x) -> np.ndarray:
    """Decision values for every row of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.support_vectors.shape[1]:
        raise ShapeError(
            "probe rows do not match the support vectors",
            dimension="columns",
            expected=model.support_vectors.shape[1],
            found=x.shape[1] if x.ndim == 2 else "2-d array",
        )
    rows = kernel_matrix(model.kernel, x, model.support_vectors)
    return rows @ model.dual_coefs + model.bias


def predict(model: SvmModel, x) -> str:
    """Class name for one probe; an exact zero maps to the +1 class."""
    value = decision_value(model, x)
    return model.class_map[1] if value >= 0 else model.class_map[-1]


def predict_many(model: SvmModel, x) -> list:
    values = decision_values(model, x)
    return [model.class_map[1] if v >= 0 else model.class_map[-1] for v in values]


def dual_objective(model: SvmModel) -> float:
    """The dual objective W(alpha) recovered from the stored model.

    With y = sign(coef) and alpha = |coef| this is
    sum(alpha) - 1/2 coefᵀ K coef, comparable across solvers.
    """
    coefs = model.dual_coefs
    k = kernel_matrix(model.kernel, model.support_vectors)
    return float(np.sum(np.abs(coefs)) - 0.5 * coefs @ k @ coefs)


def serialize(model: SvmModel) -> bytes:
    """Canonical JSON bytes; repeated serialization is byte-identical."""
    kernel: dict = {"kind": model.kernel.kind}
    if model.kernel.kind == "rbf":
        kernel["gamma"] = model.kernel.gamma
    doc = {
        "format": "featpipe-svm/1",
        "kernel": kernel,
        "C": float(model.training_meta.get("C", 0.0)),
        "tol": float(model.training_meta.get("tol", 0.0)),
        "iterations": int(model.training_meta.get("iterations", 0)),
        "bias": model.bias,
        "class_map": {"+1": model.class_map[1], "-1": model.class_map[-1]},
        "support_vectors": [[float(v) for v in row] for row in model.support_vectors],
        "dual_coefs": [float(v) for v in model.dual_coefs],
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _require(doc, key, kind):
    if key not in doc:
        raise ModelError(f"model document lacks the {key!r} field")
    value = doc[key]
    if kind is float and isinstance(value, bool):
        raise ModelError(f"model field {key!r} has the wrong type")
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ModelError(f"model field {key!r} has the wrong type")
    return value


def deserialize(data: bytes) -> SvmModel:
    """Parse and validate a serialized model."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")

    kernel_doc = _require(doc, "kernel", dict)
    kind = kernel_doc.get("kind")
    if kind == "rbf":
        gamma = kernel_doc.get("gamma")
        if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
            raise ModelError("rbf kernel requires a numeric gamma")
        kernel = KernelSpec("rbf", float(gamma))
    elif kind == "linear":
        kernel = KernelSpec("linear")
    else:
        raise ModelError(f"unknown kernel kind {kind!r}")

    c_box = _require(doc, "C", float)
    tol = _require(doc, "tol", float)
    iterations = _require(doc, "iterations", int)
    bias = _require(doc, "bias", float)
    class_doc = _require(doc, "class_map", dict)
    if set(class_doc) != {"+1", "-1"}:
        raise ModelError("class map must have exactly the keys '+1' and '-1'")
    sv_doc = _require(doc, "support_vectors", list)
    coef_doc = _require(doc, "dual_coefs", list)
    try:
        sv = np.asarray(sv_doc, dtype=np.float64)
        coefs = np.asarray(coef_doc, dtype=np.float64)
    except ValueError as exc:
        raise ModelError(f"support vectors or coefficients malformed: {exc}") from exc
    if sv.ndim != 2:
        raise ModelError("support_vectors must be a rectangular 2-d array")

    return SvmModel(
        support_vectors=sv,
        dual_coefs=coefs,
        bias=float(bias),
        kernel=kernel,
        class_map={1: str(class_doc["+1"]), -1: str(class_doc["-1"])},
        training_meta={"C": float(c_box), "tol": float(tol), "iterations": int(iterations)},
    )
