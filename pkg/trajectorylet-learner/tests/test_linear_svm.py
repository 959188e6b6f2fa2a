import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from src.features.trajectorylet import Trajectorylet
from src.learning.linear_svm import (
    Detector,
    EsvmParams,
    MulticlassModel,
    cross_validate_C,
    cross_validation_scores,
    decision_values,
    detectors_from_text,
    detectors_to_text,
    esvm_objective,
    gram_matrix,
    multiclass_from_text,
    multiclass_to_text,
    optimal_bias,
    predict,
    predict_batch,
    score,
    solve_weighted_hinge,
    train_esvm,
    train_esvm_result,
    train_ova_svm,
    unit_normalize,
)
from src.utils.error_handler import ConfigurationError, DimensionMismatchError, EmptySequenceError

PARAMS = EsvmParams(lambda_pos=10.0, lambda_neg=0.01)
TIGHT = EsvmParams(lambda_pos=10.0, lambda_neg=0.01, convergence_tolerance=1e-6)


def _qp_oracle(exemplar, negatives, params, start=None):
    """ESVM objective minimised with slack variables by SLSQP."""
    d, n = exemplar.shape[0], negatives.shape[0]

    def objective(z):
        w, xi = z[:d], z[d + 1:]
        return w @ w + params.lambda_pos * xi[0] + params.lambda_neg * xi[1:].sum()

    constraints = [
        {"type": "ineq", "fun": lambda z: z[d + 1] - 1.0 + z[:d] @ exemplar + z[d]},
        {"type": "ineq", "fun": lambda z: z[d + 2:] - 1.0 - negatives @ z[:d] - z[d]},
    ]
    bounds = [(None, None)] * (d + 1) + [(0.0, None)] * (n + 1)
    if start is None:
        z0 = np.concatenate([np.zeros(d + 1), np.ones(n + 1)])
    else:
        w, b = start
        xi0 = max(0.0, 1.0 - (w @ exemplar + b))
        xi = np.maximum(0.0, 1.0 + negatives @ w + b)
        z0 = np.concatenate([w, [b, xi0], xi])
    result = minimize(objective, z0, method="SLSQP", bounds=bounds, constraints=constraints,
                      options={"ftol": 1e-12, "maxiter": 1000})
    z = result.x
    return esvm_objective(z[:d], z[d], exemplar, negatives, params)


def test_esvm_matches_qp_oracle_on_small_problems():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(1, 6))
        exemplar = rng.normal(size=d)
        negatives = rng.normal(size=(n, d))

        result = train_esvm_result(exemplar, negatives, TIGHT)
        assert result.objective == pytest.approx(
            esvm_objective(result.weight, result.bias, exemplar, negatives, PARAMS), abs=1e-9)

        oracle = min(_qp_oracle(exemplar, negatives, PARAMS),
                     _qp_oracle(exemplar, negatives, PARAMS, start=(result.weight, result.bias)))
        assert result.objective <= oracle + 1e-3


def test_objective_traces_over_real_iterates(rng):
    exemplar = rng.normal(size=4)
    negatives = rng.normal(size=(40, 4)) + 0.5
    result = train_esvm_result(exemplar, negatives, PARAMS)

    assert len(result.iterate_trace) == len(result.dual_trace) == len(result.trace)
    assert np.all(np.diff(result.dual_trace) <= 1e-10)
    # weak duality: every primal iterate bounds the dual from above
    assert np.all(np.array(result.iterate_trace) + np.array(result.dual_trace) >= -1e-10)
    assert_allclose(result.trace[:-1], np.minimum.accumulate(result.iterate_trace)[:-1])
    assert result.trace[-1] == pytest.approx(result.objective)
    assert result.objective <= min(result.iterate_trace) + 1e-8


def test_iteration_budget_returns_best_iterate(rng):
    exemplar = rng.normal(size=3)
    negatives = rng.normal(size=(30, 3))
    full = train_esvm_result(exemplar, negatives, PARAMS)
    capped = train_esvm_result(exemplar, negatives, EsvmParams(10.0, 0.01, max_iterations=2))
    assert np.isfinite(capped.objective)
    assert capped.objective >= full.objective - 1e-4
    assert capped.objective <= 2.0 * esvm_objective(np.zeros(3), 0.0, exemplar, negatives, PARAMS)


def test_precomputed_gram_gives_same_solution(rng):
    pool = rng.normal(size=(25, 3))
    negative_index = np.arange(5, 25)
    exemplar = rng.normal(size=3)
    plain = train_esvm_result(exemplar, pool[negative_index], PARAMS)
    cached = train_esvm_result(exemplar, pool[negative_index], PARAMS,
                               gram=gram_matrix(pool), negative_index=negative_index)
    assert_allclose(cached.weight, plain.weight, atol=1e-3)
    assert cached.objective == pytest.approx(plain.objective, abs=1e-4)


def _brute_force_bias(scores, y, c):
    best_b, best_loss = None, np.inf
    for b in np.unique(y - scores):
        loss = float(np.sum(c * np.maximum(0.0, 1.0 - y * (scores + b))))
        if loss < best_loss - 1e-12:
            best_b, best_loss = b, loss
    return best_b, best_loss


def test_optimal_bias_matches_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 12))
        scores = rng.normal(size=n)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        c = rng.uniform(0.01, 5.0, size=n)
        b, loss = optimal_bias(scores, y, c)
        expected_b, expected_loss = _brute_force_bias(scores, y, c)
        assert loss == pytest.approx(expected_loss, abs=1e-9)
        assert b == pytest.approx(expected_b, abs=1e-12)


def test_optimal_bias_tie_goes_to_smallest():
    # loss is 2 everywhere on [-1, 1]
    b, loss = optimal_bias(np.zeros(2), np.array([1.0, -1.0]), np.ones(2))
    assert (b, loss) == (-1.0, 2.0)


def test_esvm_rejects_bad_input(rng):
    with pytest.raises(EmptySequenceError):
        train_esvm_result(rng.normal(size=2), np.zeros((0, 2)), PARAMS)
    with pytest.raises(DimensionMismatchError):
        train_esvm_result(rng.normal(size=2), rng.normal(size=(3, 3)), PARAMS)
    exemplar = Trajectorylet(rng.normal(size=2), "a01", 0, 1)
    same_class = Trajectorylet(rng.normal(size=2), "a01b", 0, 1)
    with pytest.raises(ValueError, match="exemplar class"):
        train_esvm(exemplar, [same_class], PARAMS)


@pytest.mark.parametrize("pos, neg", [(1.0, 1.0), (0.01, 10.0), (10.0, 0.0)])
def test_esvm_weights_must_be_ordered(pos, neg):
    with pytest.raises(ConfigurationError):
        EsvmParams(lambda_pos=pos, lambda_neg=neg)


def test_train_esvm_takes_provenance_from_exemplar(rng):
    exemplar = Trajectorylet(np.array([2.0, 2.0]), "a03_s01_e01", 7, 3)
    negatives = [Trajectorylet(v, "a01_s01_e01", i, 1) for i, v in enumerate(rng.normal(size=(6, 2)) - 2.0)]
    det = train_esvm(exemplar, negatives, PARAMS)
    assert (det.source_class, det.source_instance, det.source_frame) == (3, "a03_s01_e01", 7)
    assert score(det, exemplar) > 0


def test_unit_normalize_rescales_scores(rng):
    det = Detector(np.array([3.0, 4.0]), 10.0, source_instance="a", source_frame=1)
    unit = unit_normalize(det)
    assert unit.normalized and np.linalg.norm(unit.weight) == pytest.approx(1.0)
    x = rng.normal(size=2)
    assert score(unit, x) == pytest.approx(score(det, x) / 5.0)
    assert unit_normalize(unit) is unit
    with pytest.raises(ValueError, match="zero-weight"):
        unit_normalize(Detector(np.zeros(2), 1.0))


def _blobs(rng, per_class=12):
    centers = {1: (0.0, 4.0), 2: (4.0, -2.0), 3: (-4.0, -2.0)}
    points, labels = [], []
    for label, center in centers.items():
        points.append(rng.normal(scale=0.4, size=(per_class, 2)) + center)
        labels += [label] * per_class
    return np.vstack(points), np.array(labels)


def test_one_vs_all_separates_blobs(rng):
    points, labels = _blobs(rng)
    model = train_ova_svm(points, labels, c_reg=1.0)
    assert model.classes == (1, 2, 3)
    assert np.array_equal(predict_batch(model, points), labels)
    assert decision_values(model, points).shape == (36, 3)


def test_one_vs_all_needs_two_classes(rng):
    with pytest.raises(ValueError, match="at least 2 classes"):
        train_ova_svm(rng.normal(size=(4, 2)), [1, 1, 1, 1], 1.0)


def test_prediction_ties_go_to_lowest_class():
    model = MulticlassModel((2, 5, 9), np.zeros((3, 2)), np.zeros(3))
    assert predict(model, np.ones(2)) == 2


def test_cross_validation_prefers_smaller_c_on_ties(rng):
    points, labels = _blobs(rng)
    scores = cross_validation_scores(points, labels, grid=[2.0, 0.5, 1.0], folds=3, seed=0)
    assert list(scores) == [0.5, 1.0, 2.0]
    assert all(v == 1.0 for v in scores.values())
    assert cross_validate_C(points, labels, grid=[2.0, 0.5, 1.0], folds=3) == 0.5


def test_cross_validation_is_seeded(rng):
    points, labels = _blobs(rng)
    points = points + rng.normal(scale=2.5, size=points.shape)
    first = cross_validation_scores(points, labels, grid=[0.1, 1.0], folds=3, seed=5)
    second = cross_validation_scores(points, labels, grid=[0.1, 1.0], folds=3, seed=5)
    assert first == second


def test_weighted_solver_requires_both_signs(rng):
    with pytest.raises(ValueError, match="each sign"):
        solve_weighted_hinge(rng.normal(size=(3, 2)), np.ones(3), np.ones(3))


def test_detector_and_model_text_round_trip(rng):
    detectors = [unit_normalize(Detector(rng.normal(size=4), float(rng.normal()), 2, "a02_s01_e01", 3)),
                 Detector(rng.normal(size=4), 0.5, 1)]
    loaded = detectors_from_text(detectors_to_text(detectors))
    for original, copy in zip(detectors, loaded):
        assert np.array_equal(copy.weight, original.weight)
        assert copy.bias == original.bias
        assert copy.key == original.key and copy.normalized == original.normalized

    points, labels = _blobs(rng, per_class=5)
    model = train_ova_svm(points, labels, 2.0)
    restored = multiclass_from_text(multiclass_to_text(model))
    assert restored.classes == model.classes and restored.c_reg == 2.0
    assert np.array_equal(restored.weights, model.weights)
    assert np.array_equal(restored.biases, model.biases)


def test_one_dimensional_esvm_matches_dense_grid():
    exemplar, negatives = np.array([1.0]), np.array([[-1.0]])
    result = train_esvm_result(exemplar, negatives, TIGHT)

    axis = np.arange(-5000, 5001) * 1e-3
    b = axis[None, :]
    best = np.inf
    for w in np.array_split(axis, 20):
        w = w[:, None]
        values = w ** 2 + 10.0 * np.maximum(0.0, 1.0 - (w + b)) + 0.01 * np.maximum(0.0, 1.0 - (w - b))
        best = min(best, float(values.min()))

    assert best == pytest.approx(0.0199, abs=1e-9)
    assert result.objective == pytest.approx(best, abs=1e-3)
    assert result.weight[0] > 0


def _hinge_loss(weight, bias, points, y, c_reg):
    return c_reg * float(np.sum(np.maximum(0.0, 1.0 - y * (points @ weight + bias))))


def test_binary_one_vs_all_detectors_are_negations(rng):
    points = np.vstack([rng.normal(size=(9, 2)) + [1.0, 0.5], rng.normal(size=(13, 2)) - [1.0, 0.5]])
    labels = np.array([1] * 9 + [2] * 13)
    model = train_ova_svm(points, labels, 1.0, max_iterations=100000, tolerance=1e-8)

    assert_allclose(model.weights[1], -model.weights[0], atol=1e-4)
    # the class-2 bias, negated, is optimal for the class-1 problem too
    y = np.where(labels == 1, 1.0, -1.0)
    w = model.weights[0]
    assert _hinge_loss(w, -model.biases[1], points, y, 1.0) == pytest.approx(
        _hinge_loss(w, model.biases[0], points, y, 1.0), abs=1e-3)


def test_cross_validation_under_label_noise_keeps_smallest_c():
    # two locations; 2 of 10 instances per class carry the other class's location
    points = np.array([[-1.0]] * 8 + [[1.0]] * 2 + [[1.0]] * 8 + [[-1.0]] * 2)
    labels = np.array([1] * 10 + [2] * 10)
    grid = [0.01, 0.1, 1.0, 10.0, 100.0]

    scores = cross_validation_scores(points, labels, grid=grid, folds=5, seed=3)
    best = max(scores.values())
    assert scores[0.01] == best
    assert best >= 0.5
    assert cross_validate_C(points, labels, grid=grid, folds=5, seed=3) == 0.01
