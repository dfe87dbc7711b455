"""Linear soft-margin SVM trained by sequential minimal optimization.

Grades map to targets Benign -> -1 and Malignant -> +1.  Features are
z-scored with statistics from the training rows; constant columns are
dropped (weight fixed at zero).  The decision function is
``f(x) = w . z(x) + b`` and a sample is Malignant iff ``f(x) > 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FEATURE_NAMES, FeatureVector

BENIGN = "Benign"
MALIGNANT = "Malignant"
GRADES = (BENIGN, MALIGNANT)
MODEL_VERSION = 1
MODEL_FORMAT = "mrigrade-linear-svm"


class SingleClassError(ValueError):
    pass


class NonFiniteFeatureError(ValueError):
    pass


class MalformedModelError(ValueError):
    pass


class ModelVersionError(ValueError):
    pass


def grade_to_target(grade) -> int:
    if grade in (BENIGN, -1):
        return -1
    if grade in (MALIGNANT, 1):
        return 1
    raise ValueError(f"unknown grade {grade!r}; expected 'Benign' or 'Malignant'")


def _as_matrix(rows) -> np.ndarray:
    X = np.array(
        [r.as_array() if isinstance(r, FeatureVector) else np.asarray(r, dtype=np.float64) for r in rows],
        dtype=np.float64,
    )
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return X


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Feature rows with Benign/Malignant grades."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = _as_matrix(self.X)
        y = np.array([grade_to_target(g) for g in self.y], dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("row and label counts differ")
        if not np.all(np.isfinite(X)):
            raise NonFiniteFeatureError("training features contain NaN or infinity")
        if not ((y == -1).any() and (y == 1).any()):
            raise SingleClassError("training data must contain both Benign and Malignant rows")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    dropped: tuple = ()

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        keep = self.keep_mask()
        Z = np.zeros_like(X)
        Z[..., keep] = (X[..., keep] - self.mean[keep]) / self.std[keep]
        return Z

    def keep_mask(self) -> np.ndarray:
        keep = np.ones(self.mean.shape[0], dtype=bool)
        keep[list(self.dropped)] = False
        return keep


def standardize_fit(ts) -> Scaler:
    """Per-column mean and population std; constant columns are dropped."""
    X = ts.X if isinstance(ts, TrainingSet) else _as_matrix(ts)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    dropped = tuple(int(i) for i in np.flatnonzero(np.ptp(X, axis=0) == 0))
    std = std.copy()
    std[list(dropped)] = 1.0
    return Scaler(mean, std, dropped)


@dataclass(frozen=True, eq=False)
class SvmModel:
    weights: np.ndarray
    bias: float
    scaler: Scaler
    C: float = 1.0
    tol: float = 1e-3
    support_count: int = 0
    n_train: int = 0
    # training diagnostics; not persisted
    alphas: np.ndarray | None = None
    dual_history: tuple = field(default_factory=tuple)
    passes: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise NonFiniteFeatureError("features contain NaN or infinity")
        return self.scaler.transform(X) @ self.weights + self.bias


def dual_objective(alphas, y, K) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def _snap(a: float, C: float) -> float:
    # values within rounding distance of a bound sit on it
    if a < 1e-12 * C:
        return 0.0
    if a > C * (1.0 - 1e-12):
        return C
    return a


def _refit_bias(g, y, alphas, C, b):
    """Bias consistent with the KKT conditions for the current multipliers.

    Free support vectors pin ``b`` (their mean residual is used).  Without
    any, ``b`` is the midpoint of the interval allowed by the bound ones;
    if that interval is empty the previous ``b`` is kept.
    """
    free = (alphas > 0) & (alphas < C)
    if free.any():
        return float(np.mean(y[free] - g[free]))
    at_zero = alphas == 0
    lower_mask = (at_zero & (y > 0)) | (~at_zero & (y < 0))
    upper_mask = (at_zero & (y < 0)) | (~at_zero & (y > 0))
    lo = np.max(y[lower_mask] - g[lower_mask]) if lower_mask.any() else -np.inf
    hi = np.min(y[upper_mask] - g[upper_mask]) if upper_mask.any() else np.inf
    if lo > hi:
        return b
    if np.isinf(lo) or np.isinf(hi):
        return float(hi if np.isinf(lo) else lo)
    return float(0.5 * (lo + hi))


def svm_train(ts: TrainingSet, C: float = 1.0, tol: float = 1e-3, max_passes: int = 10, max_sweeps: int = 10000, record_history: bool = False) -> SvmModel:
    """Fit a linear SVM by SMO on standardized features.

    Sweeps visit samples in index order; a sample violating the KKT
    conditions by more than ``tol`` is paired with partners ordered by
    decreasing ``|E_i - E_j|`` (ties by index) until one pair step makes
    progress.  Training stops after ``max_passes`` consecutive sweeps with
    no update, or after ``max_sweeps`` sweeps.
    """
    if not C > 0 or not tol > 0:
        raise ValueError("C and tol must be positive")
    if not isinstance(ts, TrainingSet):
        raise TypeError("svm_train expects a TrainingSet")
    scaler = standardize_fit(ts)
    Z = scaler.transform(ts.X)
    y = ts.y.astype(np.float64)
    n = len(y)
    K = Z @ Z.T
    alphas = np.zeros(n)
    w = np.zeros(Z.shape[1])
    b = 0.0
    history = [0.0] if record_history else []
    eps = 1e-12

    def step(i, j, Ei, Ej):
        nonlocal b, w
        if i == j:
            return False
        ai, aj = alphas[i], alphas[j]
        yi, yj = y[i], y[j]
        if yi != yj:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L < eps:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= eps:
            return False
        aj_new = min(H, max(L, aj + yj * (Ei - Ej) / eta))
        if abs(aj_new - aj) < eps * (aj_new + aj + eps):
            return False
        ai_new = ai + yi * yj * (aj - aj_new)
        ai_new, aj_new = _snap(ai_new, C), _snap(aj_new, C)
        b1 = b - Ei - yi * (ai_new - ai) * K[i, i] - yj * (aj_new - aj) * K[i, j]
        b2 = b - Ej - yi * (ai_new - ai) * K[i, j] - yj * (aj_new - aj) * K[j, j]
        if 0.0 < ai_new < C:
            b = b1
        elif 0.0 < aj_new < C:
            b = b2
        else:
            b = 0.5 * (b1 + b2)
        w = w + (ai_new - ai) * yi * Z[i] + (aj_new - aj) * yj * Z[j]
        alphas[i], alphas[j] = ai_new, aj_new
        if record_history:
            history.append(dual_objective(alphas, y, K))
        return True

    passes = 0
    sweeps = 0
    while passes < max_passes and sweeps < max_sweeps:
        sweeps += 1
        changed = 0
        for i in range(n):
            E = Z @ w + b - y
            r = y[i] * E[i]
            if (r < -tol and alphas[i] < C) or (r > tol and alphas[i] > 0):
                gap = np.abs(E[i] - E)
                for j in np.argsort(-gap, kind="stable"):
                    if step(i, int(j), E[i], E[j]):
                        changed += 1
                        break
        b = _refit_bias(Z @ w, y, alphas, C, b)
        passes = passes + 1 if changed == 0 else 0

    return SvmModel(
        weights=w,
        bias=float(b),
        scaler=scaler,
        C=float(C),
        tol=float(tol),
        support_count=int(np.sum(alphas > 0)),
        n_train=n,
        alphas=alphas,
        dual_history=tuple(history),
        passes=sweeps,
    )


def svm_classify(m: SvmModel, fv) -> tuple:
    """Return ``(grade, decision_value)``; a decision value of exactly 0 is Benign."""
    x = fv.as_array() if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64)
    value = float(m.decision_function(x.reshape(1, -1))[0])
    return (MALIGNANT if value > 0 else BENIGN), value


def classify_many(m: SvmModel, X) -> list:
    values = m.decision_function(_as_matrix(X))
    return [(MALIGNANT if v > 0 else BENIGN, float(v)) for v in values]


def accuracy(m: SvmModel, ts: TrainingSet) -> float:
    pred = np.where(m.decision_function(ts.X) > 0, 1, -1)
    return float(np.mean(pred == ts.y))


def train_test_split(X, grades, test_fraction: float = 0.33, seed: int = 0):
    """Stratification-free random split; returns ``(train_set, test_set)``."""
    X = _as_matrix(X)
    grades = list(grades)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(grades))
    n_test = int(round(test_fraction * len(grades)))
    test, train = order[:n_test], order[n_test:]
    return (
        TrainingSet(X[train], [grades[i] for i in train]),
        TrainingSet(X[test], [grades[i] for i in test]),
    )


# --------------------------------------------------------------------------
# persistence


def _num(x: float) -> str:
    return format(float(x), ".17g")


def model_to_dict(m: SvmModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_names": list(FEATURE_NAMES) if len(m.weights) == len(FEATURE_NAMES) else None,
        "hyperparameters": {"C": _num(m.C), "tol": _num(m.tol)},
        "support_count": m.support_count,
        "n_train": m.n_train,
        "scaler": {
            "mean": [_num(v) for v in m.scaler.mean],
            "std": [_num(v) for v in m.scaler.std],
            "dropped": list(m.scaler.dropped),
        },
        "weights": [_num(v) for v in m.weights],
        "bias": _num(m.bias),
    }


def model_from_dict(d: dict) -> SvmModel:
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise MalformedModelError("not a linear SVM model document")
    if d.get("version") != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {d.get('version')!r}")
    try:
        sc = d["scaler"]
        mean = np.array([float(v) for v in sc["mean"]])
        std = np.array([float(v) for v in sc["std"]])
        weights = np.array([float(v) for v in d["weights"]])
        if not (mean.shape == std.shape == weights.shape):
            raise MalformedModelError("scaler and weight lengths differ")
        return SvmModel(
            weights=weights,
            bias=float(d["bias"]),
            scaler=Scaler(mean, std, tuple(int(i) for i in sc["dropped"])),
            C=float(d["hyperparameters"]["C"]),
            tol=float(d["hyperparameters"]["tol"]),
            support_count=int(d["support_count"]),
            n_train=int(d.get("n_train", 0)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, MalformedModelError):
            raise
        raise MalformedModelError(f"bad model document: {exc}") from None


def save_model(m: SvmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> SvmModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"{path}: {exc}") from None
    return model_from_dict(d)
