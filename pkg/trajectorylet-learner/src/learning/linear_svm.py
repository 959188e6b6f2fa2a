"""Weighted hinge-loss linear solvers

Both the exemplar-SVM and the one-vs-all classifier minimise

    1/2 ||w||^2 + sum_i c_i * max(0, 1 - y_i (w.x_i + b))

with an unregularised bias. The exemplar-SVM objective

    ||w||^2 + lambda_pos * h(w.x_E + b) + lambda_neg * sum_x h(-w.x - b)

is twice that form with c_E = lambda_pos / 2 and c_neg = lambda_neg / 2.

The dual is solved by sequential minimal optimisation with second-order
working-set selection. Every `trace_every` steps the primal objective of the
current iterate is evaluated with the bias re-optimised exactly, and the best
iterate so far is kept. `iterate_trace` holds those primal values as they
are, `dual_trace` the dual objective of the same iterates (non-increasing
under SMO), and `trace` the best-so-far primal, so the returned point is
never worse than any evaluated iterate.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import StratifiedKFold

from src.features.trajectorylet import Trajectorylet, stack_values
from src.utils.error_handler import (
    ConfigurationError,
    DimensionMismatchError,
    EmptySequenceError,
    TrajectoryletError,
)

logger = logging.getLogger(__name__)

TAU = 1e-12
DEFAULT_CV_GRID = tuple(2.0 ** k for k in range(-5, 6))

VectorLike = Union[Trajectorylet, np.ndarray, Sequence[float]]


# ============================================================================
# Types
# ============================================================================

@dataclass(frozen=True)
class Detector:
    """A linear detector f(x) = w.x + b with provenance."""
    weight: np.ndarray = field(repr=False)
    bias: float
    source_class: int = 0
    source_instance: str = ""
    source_frame: int = -1
    normalized: bool = False
    converged: bool = True
    objective: float = float("nan")

    def __post_init__(self):
        weight = np.array(self.weight, dtype=float).ravel()
        if not np.all(np.isfinite(weight)) or not np.isfinite(self.bias):
            raise ValueError("detector weight and bias must be finite")
        if self.normalized and abs(np.linalg.norm(weight) - 1.0) > 1e-9:
            raise ValueError("normalized detector must have unit-norm weight")
        weight.setflags(write=False)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weight.shape[0]

    @property
    def key(self) -> Tuple[str, int]:
        return self.source_instance, self.source_frame


@dataclass(frozen=True)
class EsvmParams:
    lambda_pos: float = 10.0
    lambda_neg: float = 0.01
    max_iterations: int = 20000
    convergence_tolerance: float = 1e-4

    def __post_init__(self):
        if not self.lambda_pos > self.lambda_neg > 0:
            raise ConfigurationError(
                f"ESVM weights must satisfy lambda_pos > lambda_neg > 0, got {self.lambda_pos}, {self.lambda_neg}")
        if self.max_iterations < 1 or self.convergence_tolerance <= 0:
            raise ConfigurationError("max_iterations must be >= 1 and convergence_tolerance > 0")


@dataclass(frozen=True)
class MulticlassModel:
    """One linear decision function per class, classes in ascending order."""
    classes: Tuple[int, ...]
    weights: np.ndarray = field(repr=False)  # (C, D)
    biases: np.ndarray = field(repr=False)   # (C,)
    c_reg: float = 1.0

    def __post_init__(self):
        weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        biases = np.asarray(self.biases, dtype=float).ravel()
        classes = tuple(int(c) for c in self.classes)
        if len(classes) < 2:
            raise ValueError("a multiclass model needs at least 2 classes")
        if list(classes) != sorted(set(classes)):
            raise ValueError("classes must be unique and ascending")
        if weights.shape[0] != len(classes) or biases.shape != (len(classes),):
            raise DimensionMismatchError(
                f"{len(classes)} classes but weights {weights.shape}, biases {biases.shape}")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def detectors(self) -> List[Detector]:
        return [Detector(w, b, source_class=c) for c, w, b in zip(self.classes, self.weights, self.biases)]


@dataclass
class SolverResult:
    weight: np.ndarray
    bias: float
    objective: float            # of 1/2||w||^2 + sum c_i h(.)
    converged: bool
    iterations: int
    trace: List[float] = field(default_factory=list)           # best-so-far primal
    iterate_trace: List[float] = field(default_factory=list)   # primal of each evaluated iterate
    dual_trace: List[float] = field(default_factory=list)      # 1/2 a.Qa - e.a of the same iterates


# ============================================================================
# Kernel columns
# ============================================================================

class LinearKernel:
    """
    Columns of the linear Gram matrix of `points`.

    With `gram` and `index`, K[a, b] = gram[index[a], index[b]] for rows whose
    index is >= 0; rows with index -1 (e.g. an exemplar outside the pool) are
    computed from `points` directly.
    """

    def __init__(self, points: np.ndarray, gram: Optional[np.ndarray] = None,
                 index: Optional[np.ndarray] = None, cache_size: int = 256):
        self.points = points
        self.gram = gram
        self.cache_size = cache_size
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()

        n = points.shape[0]
        if gram is not None:
            self.index = np.arange(n) if index is None else np.asarray(index, dtype=int)
            if self.index.shape != (n,):
                raise DimensionMismatchError(f"kernel index has shape {self.index.shape}, expected ({n},)")
            self._outside = np.flatnonzero(self.index < 0)
            self._safe_index = np.where(self.index < 0, 0, self.index)
            diag = np.empty(n)
            inside = self.index >= 0
            diag[inside] = gram[self.index[inside], self.index[inside]]
            diag[~inside] = np.einsum("ij,ij->i", points[~inside], points[~inside])
            self.diagonal = diag
        else:
            self.index = None
            self.diagonal = np.einsum("ij,ij->i", points, points)

    def column(self, t: int) -> np.ndarray:
        cached = self._cache.get(t)
        if cached is not None:
            self._cache.move_to_end(t)
            return cached

        if self.gram is None or self.index[t] < 0:
            col = self.points @ self.points[t]
        else:
            col = self.gram[self.index[t], self._safe_index]
            if self._outside.size:
                col = col.copy()
                col[self._outside] = self.points[self._outside] @ self.points[t]

        self._cache[t] = col
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return col


def gram_matrix(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return points @ points.T


# ============================================================================
# Solver core
# ============================================================================

def hinge(margins: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - margins)


def optimal_bias(scores: np.ndarray, y: np.ndarray, c: np.ndarray) -> Tuple[float, float]:
    """
    Exact minimiser of g(b) = sum_i c_i h(y_i (s_i + b)) for fixed scores.

    g is convex and piecewise linear with breakpoints b_i = y_i - s_i, so the
    minimum is attained at a breakpoint. Returns (b, g(b)); ties go to the
    smallest b.
    """
    breakpoints = y - scores
    pos = y > 0
    bp_pos, c_pos = breakpoints[pos], c[pos]
    bp_neg, c_neg = breakpoints[~pos], c[~pos]

    order_pos = np.argsort(bp_pos, kind="stable")
    bp_pos, c_pos = bp_pos[order_pos], c_pos[order_pos]
    order_neg = np.argsort(bp_neg, kind="stable")
    bp_neg, c_neg = bp_neg[order_neg], c_neg[order_neg]

    candidates = np.unique(breakpoints)

    # positives: c_i * (bp_i - b) for bp_i > b
    k = np.searchsorted(bp_pos, candidates, side="right")
    tail_c = np.concatenate([np.cumsum(c_pos[::-1])[::-1], [0.0]])
    tail_cb = np.concatenate([np.cumsum((c_pos * bp_pos)[::-1])[::-1], [0.0]])
    loss_pos = tail_cb[k] - candidates * tail_c[k]

    # negatives: c_i * (b - bp_i) for bp_i < b
    m = np.searchsorted(bp_neg, candidates, side="left")
    head_c = np.concatenate([[0.0], np.cumsum(c_neg)])
    head_cb = np.concatenate([[0.0], np.cumsum(c_neg * bp_neg)])
    loss_neg = candidates * head_c[m] - head_cb[m]

    loss = loss_pos + loss_neg
    best = int(np.argmin(loss))
    return float(candidates[best]), float(loss[best])


def _select_working_set(alpha, gradient, y, c, diagonal, kernel):
    """Second-order working-set selection; returns (i, j, gap) or (-1, -1, gap)."""
    minus_yg = -y * gradient
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    if not up.any() or not low.any():
        return -1, -1, 0.0

    up_values = np.where(up, minus_yg, -np.inf)
    i = int(np.argmax(up_values))
    g_max = up_values[i]
    g_min = float(np.min(np.where(low, minus_yg, np.inf)))
    gap = g_max - g_min

    k_i = kernel.column(i)
    b = g_max - minus_yg
    candidates = low & (b > 0)
    if not candidates.any():
        return -1, -1, gap
    a = diagonal[i] + diagonal - 2.0 * k_i
    a = np.where(a > 0, a, TAU)
    scores = np.where(candidates, -(b * b) / a, np.inf)
    j = int(np.argmin(scores))
    return i, j, gap


def _update_pair(i, j, alpha, gradient, y, c, diagonal, k_ij):
    """Analytic two-variable update with box clipping; returns (delta_i, delta_j)."""
    old_i, old_j = alpha[i], alpha[j]
    c_i, c_j = c[i], c[j]
    quad = diagonal[i] + diagonal[j] - 2.0 * k_ij
    if quad <= 0:
        quad = TAU

    if y[i] != y[j]:
        delta = (-gradient[i] - gradient[j]) / quad
        diff = old_i - old_j
        a_i, a_j = old_i + delta, old_j + delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
        elif a_i < 0:
            a_i, a_j = 0.0, -diff
        if diff > c_i - c_j:
            if a_i > c_i:
                a_i, a_j = c_i, c_i - diff
        elif a_j > c_j:
            a_j, a_i = c_j, c_j + diff
    else:
        delta = (gradient[i] - gradient[j]) / quad
        total = old_i + old_j
        a_i, a_j = old_i - delta, old_j + delta
        if total > c_i:
            if a_i > c_i:
                a_i, a_j = c_i, total - c_i
        elif a_j < 0:
            a_j, a_i = 0.0, total
        if total > c_j:
            if a_j > c_j:
                a_j, a_i = c_j, total - c_j
        elif a_i < 0:
            a_i, a_j = 0.0, total

    alpha[i], alpha[j] = a_i, a_j
    return a_i - old_i, a_j - old_j


def solve_weighted_hinge(
    points: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    tolerance: float = 1e-4,
    max_iterations: int = 20000,
    gram: Optional[np.ndarray] = None,
    gram_index: Optional[np.ndarray] = None,
    trace_every: int = 10,
) -> SolverResult:
    """
    Minimise 1/2 ||w||^2 + sum_i c_i h(y_i (w.x_i + b)).

    Args:
        points: (n, d) inputs
        y: labels in {+1, -1}; both signs must be present
        c: per-point loss weights (> 0)
        tolerance: stop once the maximal KKT violation falls below this
        max_iterations: SMO step budget; on exhaustion the best iterate is
            returned with converged=False
        gram, gram_index: optional precomputed Gram matrix and row mapping
            (see LinearKernel)
        trace_every: evaluate the primal every this many steps
    """
    points = np.asarray(points, dtype=float)
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=float)
    n = points.shape[0]
    if not np.all(np.isfinite(points)):
        raise ValueError("solver input contains non-finite values")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("solver needs at least one point of each sign")

    kernel = LinearKernel(points, gram, gram_index)
    diagonal = kernel.diagonal
    alpha = np.zeros(n)
    gradient = -np.ones(n)  # Q alpha - e

    def primal(current_alpha, current_gradient):
        # scores s_t = w.x_t = y_t (G_t + 1); ||w||^2 = sum alpha_t (G_t + 1)
        scores = y * (current_gradient + 1.0)
        norm_sq = max(float(np.dot(current_alpha, current_gradient + 1.0)), 0.0)
        bias, loss = optimal_bias(scores, y, c)
        return 0.5 * norm_sq + loss, bias

    def dual(current_alpha, current_gradient):
        return 0.5 * float(np.dot(current_alpha, current_gradient - 1.0))

    best_objective, best_bias = primal(alpha, gradient)
    best_alpha = alpha.copy()
    trace = [best_objective]
    iterate_trace = [best_objective]
    dual_trace = [dual(alpha, gradient)]

    converged = False
    iterations = 0
    while iterations < max_iterations:
        i, j, gap = _select_working_set(alpha, gradient, y, c, diagonal, kernel)
        if i < 0 or gap < tolerance:
            converged = True
            break

        k_i = kernel.column(i)
        k_j = kernel.column(j)
        d_i, d_j = _update_pair(i, j, alpha, gradient, y, c, diagonal, k_i[j])
        gradient += y * (y[i] * d_i * k_i + y[j] * d_j * k_j)
        iterations += 1

        if iterations % trace_every == 0:
            objective, bias = primal(alpha, gradient)
            iterate_trace.append(objective)
            dual_trace.append(dual(alpha, gradient))
            if objective < best_objective:
                best_objective, best_bias = objective, bias
                best_alpha = alpha.copy()
            trace.append(best_objective)

    objective, bias = primal(alpha, gradient)
    iterate_trace.append(objective)
    dual_trace.append(dual(alpha, gradient))
    if objective < best_objective:
        best_objective, best_bias = objective, bias
        best_alpha = alpha.copy()
    trace.append(best_objective)

    weight = points.T @ (best_alpha * y)
    # recompute exactly from the final weight
    scores = points @ weight
    best_bias, loss = optimal_bias(scores, y, c)
    best_objective = 0.5 * float(weight @ weight) + loss
    trace[-1] = min(trace[-1], best_objective)

    return SolverResult(weight, best_bias, best_objective, converged, iterations, trace, iterate_trace, dual_trace)


# ============================================================================
# Exemplar-SVM
# ============================================================================

def _as_vector(x: VectorLike) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, Trajectorylet) else x, dtype=float).ravel()


def _as_matrix(rows) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        return np.atleast_2d(np.asarray(rows, dtype=float))
    return stack_values(rows)


def esvm_objective(weight: np.ndarray, bias: float, exemplar: VectorLike, negatives,
                   params: EsvmParams) -> float:
    """||w||^2 + lambda_pos h(w.x_E + b) + lambda_neg sum h(-w.x - b)"""
    weight = np.asarray(weight, dtype=float)
    x_e = _as_vector(exemplar)
    negatives = _as_matrix(negatives)
    positive_loss = hinge(np.array([weight @ x_e + bias]))[0]
    negative_loss = hinge(-(negatives @ weight) - bias).sum()
    return float(weight @ weight + params.lambda_pos * positive_loss + params.lambda_neg * negative_loss)


def train_esvm_result(
    exemplar: VectorLike,
    negatives,
    params: EsvmParams,
    gram: Optional[np.ndarray] = None,
    negative_index: Optional[np.ndarray] = None,
) -> SolverResult:
    """
    Solve one exemplar-SVM; objective and trace are on the ESVM scale.

    `gram` is a precomputed Gram matrix of a larger pool and `negative_index`
    maps each negative row to its pool row.
    """
    x_e = _as_vector(exemplar)
    negatives_matrix = _as_matrix(negatives)
    if negatives_matrix.shape[0] == 0 or negatives_matrix.size == 0:
        raise EmptySequenceError("exemplar-SVM needs at least one negative")
    if negatives_matrix.shape[1] != x_e.shape[0]:
        raise DimensionMismatchError(
            f"exemplar dim {x_e.shape[0]} != negative dim {negatives_matrix.shape[1]}")
    if not (np.all(np.isfinite(x_e)) and np.all(np.isfinite(negatives_matrix))):
        raise ValueError("exemplar-SVM input contains non-finite values")
    if isinstance(exemplar, Trajectorylet) and not isinstance(negatives, np.ndarray):
        if any(isinstance(n, Trajectorylet) and n.class_label == exemplar.class_label for n in negatives):
            raise ValueError(f"negatives contain the exemplar class {exemplar.class_label}")

    n_neg = negatives_matrix.shape[0]
    points = np.vstack([x_e[None, :], negatives_matrix])
    y = np.concatenate([[1.0], -np.ones(n_neg)])
    c = np.concatenate([[params.lambda_pos / 2.0], np.full(n_neg, params.lambda_neg / 2.0)])

    index = None
    if gram is not None:
        if negative_index is None:
            raise DimensionMismatchError("negative_index is required with a precomputed gram")
        index = np.concatenate([[-1], np.asarray(negative_index, dtype=int)])

    result = solve_weighted_hinge(points, y, c, params.convergence_tolerance, params.max_iterations,
                                  gram=gram, gram_index=index)
    result.objective *= 2.0
    result.trace = [2.0 * v for v in result.trace]
    result.iterate_trace = [2.0 * v for v in result.iterate_trace]
    result.dual_trace = [2.0 * v for v in result.dual_trace]
    return result


def train_esvm(
    exemplar: VectorLike,
    negatives,
    params: EsvmParams,
    gram: Optional[np.ndarray] = None,
    negative_index: Optional[np.ndarray] = None,
    source_class: Optional[int] = None,
    source_instance: Optional[str] = None,
    source_frame: Optional[int] = None,
) -> Detector:
    """Train one exemplar-SVM; provenance defaults to the exemplar's metadata."""
    result = train_esvm_result(exemplar, negatives, params, gram=gram, negative_index=negative_index)
    if not result.converged:
        logger.debug(f"ESVM stopped after {result.iterations} iterations without meeting tolerance")

    if isinstance(exemplar, Trajectorylet):
        source_class = exemplar.class_label if source_class is None else source_class
        source_instance = exemplar.source_instance if source_instance is None else source_instance
        source_frame = exemplar.start_frame if source_frame is None else source_frame

    return Detector(
        weight=result.weight,
        bias=result.bias,
        source_class=source_class or 0,
        source_instance=source_instance or "",
        source_frame=-1 if source_frame is None else source_frame,
        converged=result.converged,
        objective=result.objective,
    )


def unit_normalize(det: Detector) -> Detector:
    """Rescale weight and bias by 1/||w|| so scores become signed distances."""
    norm = float(np.linalg.norm(det.weight))
    if norm == 0.0:
        raise ValueError(f"cannot normalize a zero-weight detector ({det.source_instance} t0={det.source_frame})")
    if det.normalized:
        return det
    return replace(det, weight=det.weight / norm, bias=det.bias / norm, normalized=True)


def score(det: Detector, x: VectorLike) -> float:
    x = _as_vector(x)
    if x.shape[0] != det.dim:
        raise DimensionMismatchError(f"detector dim {det.dim} != input dim {x.shape[0]}")
    return float(det.weight @ x + det.bias)


def score_matrix(detectors: Sequence[Detector], points: np.ndarray) -> np.ndarray:
    """(n_points, n_detectors) scores."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.vstack([d.weight for d in detectors])
    if points.shape[1] != weights.shape[1]:
        raise DimensionMismatchError(f"detector dim {weights.shape[1]} != input dim {points.shape[1]}")
    return points @ weights.T + np.array([d.bias for d in detectors])


# ============================================================================
# One-vs-all classifier
# ============================================================================

def _encoding_matrix(encodings) -> np.ndarray:
    rows = [getattr(e, "values", e) for e in encodings] if not isinstance(encodings, np.ndarray) else encodings
    matrix = np.atleast_2d(np.asarray(rows, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise ValueError("encodings contain non-finite values")
    return matrix


def train_ova_svm(
    encodings,
    labels: Sequence[int],
    c_reg: float,
    max_iterations: int = 100000,
    tolerance: float = 1e-4,
    gram: Optional[np.ndarray] = None,
    gram_cache_limit: int = 4000,
) -> MulticlassModel:
    """One L2-regularised hinge-loss binary classifier per class (class vs rest)."""
    matrix = _encoding_matrix(encodings)
    labels = np.asarray(labels, dtype=int)
    if labels.shape[0] != matrix.shape[0]:
        raise DimensionMismatchError(f"{matrix.shape[0]} encodings but {labels.shape[0]} labels")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError(f"one-vs-all training needs at least 2 classes, got {classes.tolist()}")
    if c_reg <= 0:
        raise ConfigurationError(f"C_reg must be positive, got {c_reg}")

    if gram is None and matrix.shape[0] <= gram_cache_limit:
        gram = gram_matrix(matrix)

    weights, biases = [], []
    c = np.full(matrix.shape[0], float(c_reg))
    for cls in classes:
        y = np.where(labels == cls, 1.0, -1.0)
        result = solve_weighted_hinge(matrix, y, c, tolerance, max_iterations, gram=gram)
        if not result.converged:
            logger.warning(f"⚠️  OvA solver for class {cls} hit the iteration budget (C={c_reg})")
        weights.append(result.weight)
        biases.append(result.bias)

    return MulticlassModel(tuple(classes.tolist()), np.vstack(weights), np.array(biases), c_reg)


def decision_values(model: MulticlassModel, encodings) -> np.ndarray:
    """(n, C) per-class decision values."""
    matrix = _encoding_matrix(encodings)
    if matrix.shape[1] != model.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != encoding dim {matrix.shape[1]}")
    return matrix @ model.weights.T + model.biases


def predict(model: MulticlassModel, encoding) -> int:
    """Class with the largest decision value; ties go to the lowest class."""
    values = decision_values(model, [encoding])[0]
    return model.classes[int(np.argmax(values))]


def predict_batch(model: MulticlassModel, encodings) -> np.ndarray:
    values = decision_values(model, encodings)
    return np.asarray(model.classes)[np.argmax(values, axis=1)]


def cross_validation_scores(
    encodings,
    labels: Sequence[int],
    grid: Sequence[float] = DEFAULT_CV_GRID,
    folds: int = 5,
    seed: int = 0,
    max_iterations: int = 100000,
    tolerance: float = 1e-4,
) -> Dict[float, float]:
    """Mean validation accuracy per grid value over seeded stratified folds."""
    matrix = _encoding_matrix(encodings)
    labels = np.asarray(labels, dtype=int)
    if not len(grid):
        raise ConfigurationError("cross-validation grid is empty")
    if matrix.shape[0] < folds:
        raise EmptySequenceError(f"{matrix.shape[0]} instances is fewer than {folds} folds")

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(splitter.split(matrix, labels))
    gram = gram_matrix(matrix)

    scores: Dict[float, float] = {}
    for c_reg in sorted(float(v) for v in grid):
        accuracies = []
        for train_idx, test_idx in splits:
            if np.unique(labels[train_idx]).size < 2:
                raise TrajectoryletError("a cross-validation fold has a single training class")
            model = train_ova_svm(matrix[train_idx], labels[train_idx], c_reg, max_iterations, tolerance,
                                  gram=gram[np.ix_(train_idx, train_idx)])
            predictions = predict_batch(model, matrix[test_idx])
            accuracies.append(float(np.mean(predictions == labels[test_idx])))
        scores[c_reg] = float(np.mean(accuracies))
        logger.debug(f"CV C={c_reg:g}: mean accuracy {scores[c_reg]:.4f}")
    return scores


def cross_validate_C(
    encodings,
    labels: Sequence[int],
    grid: Sequence[float] = DEFAULT_CV_GRID,
    folds: int = 5,
    seed: int = 0,
    max_iterations: int = 100000,
    tolerance: float = 1e-4,
) -> float:
    """Grid value with the best mean fold accuracy; ties go to the smaller value."""
    scores = cross_validation_scores(encodings, labels, grid, folds, seed, max_iterations, tolerance)
    best = max(scores.values())
    chosen = min(c for c, acc in scores.items() if acc == best)
    logger.info(f"Cross-validation chose C_reg={chosen:g} (mean accuracy {best:.4f})")
    return chosen


# ============================================================================
# Text serialization
# ============================================================================

def detector_to_text(det: Detector) -> str:
    instance = det.source_instance or "-"
    meta = f"class={det.source_class} instance={instance} frame={det.source_frame} normalized={int(det.normalized)}"
    row = " ".join(repr(v) for v in [det.bias] + det.weight.tolist())
    return f"{meta}\n{row}\n"


def detectors_to_text(detectors: Sequence[Detector]) -> str:
    return "".join(detector_to_text(d) for d in detectors)


def detectors_from_text(text: str) -> List[Detector]:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) % 2:
        raise ValueError("detector text must alternate metadata and value lines")
    detectors = []
    for meta_line, row_line in zip(lines[0::2], lines[1::2]):
        meta = dict(item.split("=", 1) for item in meta_line.split())
        values = [float(v) for v in row_line.split()]
        instance = meta.get("instance", "-")
        detectors.append(Detector(
            weight=np.array(values[1:]),
            bias=values[0],
            source_class=int(meta["class"]),
            source_instance="" if instance == "-" else instance,
            source_frame=int(meta["frame"]),
            normalized=meta.get("normalized", "0") == "1",
        ))
    return detectors


def multiclass_to_text(model: MulticlassModel) -> str:
    header = f"classes={','.join(str(c) for c in model.classes)} C_reg={model.c_reg!r}\n"
    return header + detectors_to_text(model.detectors)


def multiclass_from_text(text: str) -> MulticlassModel:
    first, _, rest = text.partition("\n")
    header = dict(item.split("=", 1) for item in first.split())
    detectors = detectors_from_text(rest)
    classes = tuple(int(c) for c in header["classes"].split(","))
    if tuple(d.source_class for d in detectors) != classes:
        raise ValueError("multiclass text: detector classes do not match the header")
    return MulticlassModel(classes, np.vstack([d.weight for d in detectors]),
                           np.array([d.bias for d in detectors]), float(header["C_reg"]))
