"""
Soft-margin support vector machine trained with SMO, extended to multiclass
by one-against-one voting.

The binary solver follows the reference decomposition method: maximal
violating pair with second-order working-set selection, analytic two-variable
update with clipping, and the bias taken from the free multipliers.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist
from sklearn.model_selection import StratifiedKFold
from tqdm import tqdm

from src.errors import (DataError, DimensionMismatch, EmptyTestSet, FewerThanTwoClasses,
                        NonFiniteFeature, SingleClassData)
from utils.constants import ALPHA_EPS, GRID_C, GRID_GAMMA_SCALE

logger = logging.getLogger(__name__)

TAU = 1e-12


# ============================================================================
# TYPES
# ============================================================================

@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"  # rbf | polynomial | linear
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "polynomial", "linear"):
            raise DataError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.gamma <= 0:
            raise DataError("rbf kernel needs gamma > 0")
        if self.kind == "polynomial" and self.degree < 1:
            raise DataError("polynomial kernel needs degree >= 1")


@dataclass(frozen=True, eq=False)
class BinaryModel:
    support_vectors: np.ndarray  # (n_sv, dim)
    alphas: np.ndarray  # alpha_i * y_i
    bias: float
    class_pair: tuple
    n_iter: int = 0


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    classes: tuple
    binaries: list
    kernel: KernelSpec
    C: float
    scale_min: np.ndarray = field(default=None)
    scale_max: np.ndarray = field(default=None)

    @property
    def dim(self):
        if self.scale_min is not None:
            return self.scale_min.size
        for binary in self.binaries:
            if binary.support_vectors.size:
                return binary.support_vectors.shape[1]
        return 0


# ============================================================================
# KERNELS
# ============================================================================

def kernel_eval(spec: KernelSpec, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    if spec.kind == "rbf":
        diff = x - y
        return float(np.exp(-spec.gamma * np.dot(diff, diff)))
    if spec.kind == "polynomial":
        return float((np.dot(x, y) + spec.coef0) ** spec.degree)
    return float(np.dot(x, y))


def gram(spec: KernelSpec, A, B):
    """Kernel matrix between the rows of A and the rows of B"""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature dimension {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "rbf":
        return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))
    if spec.kind == "polynomial":
        return (A @ B.T + spec.coef0) ** spec.degree
    return A @ B.T


# ============================================================================
# BINARY SMO
# ============================================================================

def _check_features(X):
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or infinite values")


def _bias(alpha, y, G, C):
    y_grad = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return -float(y_grad[free].mean())

    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = y_grad[ub_mask].min() if ub_mask.any() else None
    lb = y_grad[lb_mask].max() if lb_mask.any() else None
    if ub is not None and lb is not None:
        rho = (ub + lb) / 2.0
    else:
        rho = ub if ub is not None else (lb if lb is not None else 0.0)
    return -float(rho)


def train_binary(X, y, spec: KernelSpec, C: float, tol: float = 1e-3, max_passes: int = 100,
                 class_pair=(1, -1)) -> BinaryModel:
    """
    Train a soft-margin binary SVM

    Args:
        X: (n, dim) feature matrix
        y: Labels in {-1, +1}
        spec: Kernel
        C: Box constraint
        tol: Stopping tolerance on the maximal KKT violation
        max_passes: Update budget in units of n working-set updates
        class_pair: Labels recorded for +1 and -1

    Returns:
        BinaryModel keeping only multipliers above ALPHA_EPS
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_features(X)
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise DataError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClassData("binary training needs samples of both labels")
    if C <= 0 or tol <= 0:
        raise DataError("C and tol must be positive")

    n = y.size
    K = gram(spec, X, X)
    QD = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)

    budget = max_passes * max(n, 1)
    n_iter = 0
    while n_iter < budget:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        y_grad = y * G

        up = ((y > 0) & ~at_upper) | ((y < 0) & ~at_lower)
        low = ((y > 0) & ~at_lower) | ((y < 0) & ~at_upper)
        if not up.any() or not low.any():
            break

        scores = np.where(up, -y_grad, -np.inf)
        i = int(np.argmax(scores))
        g_max = scores[i]
        g_max2 = np.max(np.where(low, y_grad, -np.inf))
        if g_max + g_max2 < tol:
            break

        grad_diff = g_max + y_grad
        candidates = low & (grad_diff > 0)
        if not candidates.any():
            break
        quad = QD[i] + QD - 2.0 * K[i]
        quad = np.where(quad > 0, quad, TAU)
        objective = np.where(candidates, -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(objective))

        old_i, old_j = alpha[i], alpha[j]
        q_ij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            coef = QD[i] + QD[j] + 2.0 * q_ij
            delta = (-G[i] - G[j]) / (coef if coef > 0 else TAU)
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            coef = QD[i] + QD[j] - 2.0 * q_ij
            delta = (G[i] - G[j]) / (coef if coef > 0 else TAU)
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                elif alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                elif alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        n_iter += 1
        if d_i == 0.0 and d_j == 0.0:
            break
        G += y * (y[i] * K[:, i] * d_i + y[j] * K[:, j] * d_j)

    if n_iter >= budget:
        logger.warning("SMO stopped at the update budget (%d) before reaching tol=%g", budget, tol)

    bias = _bias(alpha, y, G, C)
    keep = alpha > ALPHA_EPS
    return BinaryModel(support_vectors=X[keep].copy(), alphas=(alpha * y)[keep].copy(),
                       bias=bias, class_pair=tuple(class_pair), n_iter=n_iter)


def decision_value(model: BinaryModel, kernel: KernelSpec, x):
    """b + sum_i alpha_i y_i K(sv_i, x)"""
    x = np.asarray(x, dtype=np.float64)
    if model.alphas.size == 0:
        return float(model.bias)
    if model.support_vectors.shape[1] != x.size:
        raise DimensionMismatch(
            f"model expects {model.support_vectors.shape[1]} features, got {x.size}")
    return float(model.bias + gram(kernel, model.support_vectors, x[None, :])[:, 0] @ model.alphas)


def _decision_rows(model: BinaryModel, kernel: KernelSpec, X):
    if model.alphas.size == 0:
        return np.full(X.shape[0], model.bias)
    return gram(kernel, X, model.support_vectors) @ model.alphas + model.bias


# ============================================================================
# MULTICLASS
# ============================================================================

def fit_scaling(X):
    return X.min(axis=0), X.max(axis=0)


def apply_scaling(X, lo, hi):
    """Map every dimension to [0, 1] by the training range; constant dimensions map to 0"""
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (X - lo) / safe, 0.0)


def train_multiclass(X, labels, spec: KernelSpec, C: float, tol: float = 1e-3,
                     max_passes: int = 100, feature_scaling: bool = True,
                     workers: int = 1, progress: bool = False) -> MulticlassModel:
    """
    One-against-one multiclass training

    Args:
        X: (n, dim) feature matrix
        labels: Class label per row
        spec: Kernel
        C: Box constraint for every pairwise problem
        tol, max_passes: Passed to train_binary
        feature_scaling: Rescale features to [0, 1] by the training range
        workers: Parallel pairwise trainings
        progress: Show a progress bar

    Returns:
        MulticlassModel with k(k-1)/2 binary models in lexicographic pair order
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    _check_features(X)
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise FewerThanTwoClasses(f"need at least two classes, got {len(classes)}")

    lo = hi = None
    if feature_scaling:
        lo, hi = fit_scaling(X)
        X = apply_scaling(X, lo, hi)

    pairs = list(combinations(range(len(classes)), 2))
    jobs = []
    for a, b in pairs:
        rows = (labels == classes[a]) | (labels == classes[b])
        y = np.where(labels[rows] == classes[a], 1.0, -1.0)
        jobs.append(delayed(train_binary)(X[rows], y, spec, C, tol, max_passes,
                                          (classes[a], classes[b])))

    # Results come back in submission order, so the bar ticks as pairs finish
    results = Parallel(n_jobs=workers, return_as="generator")(jobs)
    binaries = list(tqdm(results, total=len(jobs), desc="Training pairs", unit="pair",
                         disable=not progress))
    logger.info("Trained %d binary models over %d classes", len(binaries), len(classes))
    return MulticlassModel(classes=classes, binaries=list(binaries), kernel=spec, C=C,
                           scale_min=lo, scale_max=hi)


def decision_matrix(model: MulticlassModel, X):
    """(n, n_binaries) decision values for raw (unscaled) features"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.dim and X.shape[1] != model.dim:
        raise DimensionMismatch(f"model expects {model.dim} features, got {X.shape[1]}")
    if model.scale_min is not None:
        X = apply_scaling(X, model.scale_min, model.scale_max)
    return np.column_stack([_decision_rows(b, model.kernel, X) for b in model.binaries])


def _vote(model, decisions):
    index = {label: i for i, label in enumerate(model.classes)}
    k = len(model.classes)
    votes = np.zeros(k, dtype=np.int64)
    strength = np.zeros(k)
    for binary, value in zip(model.binaries, decisions):
        winner = index[binary.class_pair[0] if value > 0 else binary.class_pair[1]]
        votes[winner] += 1
        strength[winner] += abs(value)
    # Most votes, then larger summed |decision|, then lexicographic label
    best = min(range(k), key=lambda c: (-votes[c], -strength[c], c))
    return model.classes[best]


def predict_many(model: MulticlassModel, X):
    decisions = decision_matrix(model, X)
    return [_vote(model, row) for row in decisions]


def predict(model: MulticlassModel, x):
    return predict_many(model, np.asarray(x, dtype=np.float64)[None, :])[0]


def accuracy(model: MulticlassModel, X, labels):
    """Fraction of exactly matching predicted labels"""
    labels = list(labels)
    if not labels:
        raise EmptyTestSet("accuracy needs at least one test sample")
    predicted = predict_many(model, X)
    return sum(p == t for p, t in zip(predicted, labels)) / len(labels)


def grid_search(X, labels, kind="rbf", degree=3, coef0=1.0, tol=1e-3, max_passes=100,
                feature_scaling=True, folds=5, seed=7, workers=1):
    """
    Pick C and gamma by stratified cross-validation

    Gamma candidates are multiples of 1/dim; for non-rbf kernels only C is searched.

    Returns:
        Tuple (best_C, best_gamma, table) where table is a list of dicts
        with keys C, gamma, cv_accuracy
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=object)
    _, counts = np.unique(labels, return_counts=True)
    n_splits = max(2, min(folds, int(counts.min())))
    splitter = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=seed)
    splits = list(splitter.split(X, labels))

    base_gamma = 1.0 / X.shape[1]
    gammas = [s * base_gamma for s in GRID_GAMMA_SCALE] if kind == "rbf" else [base_gamma]

    table = []
    for C in GRID_C:
        for gamma in gammas:
            spec = KernelSpec(kind=kind, gamma=gamma, degree=degree, coef0=coef0)
            scores = []
            for train_idx, test_idx in splits:
                model = train_multiclass(X[train_idx], labels[train_idx], spec, C, tol,
                                         max_passes, feature_scaling, workers)
                scores.append(accuracy(model, X[test_idx], labels[test_idx]))
            table.append({"C": C, "gamma": gamma, "cv_accuracy": float(np.mean(scores))})
            logger.info("CV C=%g gamma=%g -> %.4f", C, gamma, table[-1]["cv_accuracy"])

    best = max(table, key=lambda row: row["cv_accuracy"])
    return best["C"], best["gamma"], table
