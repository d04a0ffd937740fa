"""Soft-margin SVM training with FAR/FRR bias calibration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
KKT_TOL = 1e-3
_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """``gamma=None`` on an RBF kernel means: derive it from the training data."""

    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise InvalidInputError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return a @ b.T
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


# Default kernel/C pair for each feature family.
PRESETS = {
    "cnn": (KernelSpec("linear"), 1.0),
    "handcrafted": (KernelSpec("rbf"), 100.0),
}


@dataclass(frozen=True)
class SvmModel:
    """Trained SVM. Support vectors live in the standardized feature space."""

    support_vectors: np.ndarray
    dual_coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: KernelSpec
    c: float
    mean: np.ndarray
    scale: np.ndarray
    converged: bool = True
    iterations: int = 0
    support_indices: tuple[int, ...] = ()

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def standardize(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise InvalidInputError(f"expected {self.n_features} features, got {x.shape[1]}")
        return (x - self.mean) / self.scale

    def decision_values(self, x) -> np.ndarray:
        z = self.standardize(x)
        if len(self.dual_coefficients) == 0:
            return np.full(z.shape[0], self.bias)
        return self.kernel.matrix(z, self.support_vectors) @ self.dual_coefficients + self.bias

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_values(x) >= 0, 1, -1)


def decision_value(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("x must be a single feature vector")
    return float(model.decision_values(x[None, :])[0])


def default_rbf_gamma(matrix) -> float:
    """gamma = 1 / (m * Var(X)) with the variance pooled over all entries."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError("training matrix must be 2-D")
    var = x.var()
    if not var > 0:
        raise InvalidInputError("training matrix has zero variance")
    return 1.0 / (x.shape[1] * var)


def _fit_standardization(x, enabled):
    if not enabled:
        return np.zeros(x.shape[1]), np.ones(x.shape[1])
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def _check_labels(y):
    y = np.asarray(y)
    if not np.all(np.isin(y, (-1, 1))):
        raise InvalidInputError("labels must be +1 or -1")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise InvalidInputError("need at least one sample of each label")
    return y.astype(np.float64)


def solve_dual(K, y, c, tol=KKT_TOL, max_iter=None):
    """SMO on ``min 0.5 a'Qa - sum(a)``, ``0 <= a <= c``, ``y'a = 0``.

    Working pairs are picked by maximal violation for ``i`` and second-order
    gain for ``j``. Returns ``(alpha, rho, converged, iterations)`` where the
    decision function is ``sum_i a_i y_i K(x_i, x) - rho``.
    """
    n = len(y)
    if max_iter is None:
        max_iter = 10_000 * max(n, 1)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        m_up = minus_yg[i]
        m_low = minus_yg[low].min()
        if m_up - m_low < tol:
            converged = True
            break
        cand = low & (minus_yg < m_up)
        b = m_up - minus_yg[cand]
        a = diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, _TAU)
        j = int(np.flatnonzero(cand)[np.argmax(b * b / a)])
        _update_pair(i, j, alpha, grad, Q, y, c)
    else:
        log.warning("SMO hit the iteration cap (%d) before reaching tolerance %g", max_iter, tol)

    minus_yg = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(np.mean(y[free] * grad[free]))
    else:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        hi = minus_yg[up].max() if up.any() else 0.0
        lo = minus_yg[low].min() if low.any() else 0.0
        rho = -float(hi + lo) / 2.0
    return alpha, rho, converged, it


def _update_pair(i, j, alpha, grad, Q, y, c):
    ai_old, aj_old = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = max(Q[i, i] + Q[j, j] + 2.0 * Q[i, j], _TAU)
        delta = (-grad[i] - grad[j]) / quad
        diff = ai_old - aj_old
        ai, aj = ai_old + delta, aj_old + delta
        if diff > 0 and aj < 0:
            aj, ai = 0.0, diff
        elif diff <= 0 and ai < 0:
            ai, aj = 0.0, -diff
        if diff > 0 and ai > c:
            ai, aj = c, c - diff
        elif diff <= 0 and aj > c:
            aj, ai = c, c + diff
    else:
        quad = max(Q[i, i] + Q[j, j] - 2.0 * Q[i, j], _TAU)
        delta = (grad[i] - grad[j]) / quad
        total = ai_old + aj_old
        ai, aj = ai_old - delta, aj_old + delta
        if total > c and ai > c:
            ai, aj = c, total - c
        elif total <= c and aj < 0:
            aj, ai = 0.0, total
        if total > c and aj > c:
            aj, ai = c, total - c
        elif total <= c and ai < 0:
            ai, aj = 0.0, total
    alpha[i], alpha[j] = ai, aj
    grad += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)


def train_svm(x, y, kernel: KernelSpec = KernelSpec(), c: float = 1.0, standardize: bool = True,
              tol: float = KKT_TOL) -> SvmModel:
    """Fit a soft-margin SVM on rows of ``x`` with labels in {+1, -1}."""
    x = np.asarray(x, dtype=np.float64)
    yf = _check_labels(y)
    if x.ndim != 2 or x.shape[0] != yf.shape[0]:
        raise InvalidInputError("x must be 2-D with one row per label")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("features must be finite")
    if c <= 0:
        raise InvalidInputError("c must be positive")
    mean, scale = _fit_standardization(x, standardize)
    z = (x - mean) / scale
    if kernel.kind == "rbf" and kernel.gamma is None:
        kernel = replace(kernel, gamma=default_rbf_gamma(z))
    alpha, rho, converged, iterations = solve_dual(kernel.matrix(z, z), yf, c, tol=tol)
    sv = alpha > 0
    return SvmModel(
        support_vectors=z[sv],
        dual_coefficients=alpha[sv] * yf[sv],
        bias=-rho,
        kernel=kernel,
        c=float(c),
        mean=mean,
        scale=scale,
        converged=converged,
        iterations=iterations,
        support_indices=tuple(int(i) for i in np.flatnonzero(sv)),
    )


def dual_objective(model: SvmModel) -> float:
    """Value of ``sum(a) - 0.5 a'Qa`` (the maximized dual) at the solution."""
    coef = model.dual_coefficients
    K = model.kernel.matrix(model.support_vectors, model.support_vectors)
    return float(np.abs(coef).sum() - 0.5 * coef @ K @ coef)


def error_rates(scores, y, threshold=0.0):
    """(FAR, FRR) when accepting ``scores >= threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    accept = scores >= threshold
    pos, neg = y == 1, y == -1
    far = np.count_nonzero(accept & neg) / max(np.count_nonzero(neg), 1)
    frr = np.count_nonzero(~accept & pos) / max(np.count_nonzero(pos), 1)
    return far, frr


@dataclass(frozen=True)
class Calibration:
    threshold: float
    far: float
    frr: float
    accuracy: float

    @property
    def gap(self) -> float:
        return abs(self.far - self.frr)

    @property
    def within_one_percent(self) -> bool:
        return self.gap < 0.01


def calibration_thresholds(scores) -> np.ndarray:
    """Midpoints between consecutive distinct scores plus both extremes."""
    s = np.unique(np.asarray(scores, dtype=np.float64))
    mids = s[:-1] + (s[1:] - s[:-1]) / 2.0
    # adjacent floats can round the midpoint down onto the lower score
    mids = np.where(mids > s[:-1], mids, s[1:])
    margin = max(1.0, float(np.ptp(s)))
    return np.concatenate([[s[0] - margin], mids, [s[-1] + margin]])


def sweep_threshold(scores, y) -> Calibration:
    """Threshold minimizing |FAR - FRR|, ties broken by accuracy then order."""
    y = np.asarray(y)
    if not (np.any(y == 1) and np.any(y == -1)):
        raise InvalidInputError("calibration set needs both labels")
    best = None
    for t in calibration_thresholds(scores):
        far, frr = error_rates(scores, y, t)
        acc = float(np.mean(np.where(np.asarray(scores) >= t, 1, -1) == y))
        key = (round(abs(far - frr), 12), -acc)
        if best is None or key < best[0]:
            best = (key, Calibration(float(t), far, frr, acc))
    return best[1]


def calibrate_bias(model: SvmModel, x, y) -> tuple[SvmModel, Calibration]:
    """Shift the bias so that FAR and FRR on ``(x, y)`` are as close as possible."""
    cal = sweep_threshold(model.decision_values(x), y)
    return replace(model, bias=model.bias - cal.threshold), cal


def stratified_folds(y, folds, seed=0):
    """Assign each sample a fold id, round-robin within each shuffled class."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for label in (-1, 1):
        idx = np.flatnonzero(y == label)
        if len(idx) < folds:
            raise InvalidInputError(f"class {label:+d} has {len(idx)} samples, fewer than {folds} folds")
        assignment[rng.permutation(idx)] = np.arange(len(idx)) % folds
    return assignment


def grid_search_c(x, y, kernel: KernelSpec = KernelSpec(), c_grid=DEFAULT_C_GRID, folds: int = 5,
                  seed: int = 0, standardize: bool = True):
    """Cross-validated accuracy per C. Returns ``(best_c, {c: score})``.

    Ties go to the smaller C.
    """
    if len(c_grid) == 0:
        raise InvalidInputError("c_grid is empty")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    _check_labels(y)
    fold_of = stratified_folds(y, folds, seed)
    scores = {}
    for c in sorted(c_grid):
        correct = 0
        for f in range(folds):
            tr, te = fold_of != f, fold_of == f
            model = train_svm(x[tr], y[tr], kernel, c, standardize=standardize)
            correct += int(np.sum(model.predict(x[te]) == y[te]))
        scores[c] = correct / len(y)
    best_c = max(sorted(scores), key=lambda c: (scores[c], -c))
    return best_c, scores
