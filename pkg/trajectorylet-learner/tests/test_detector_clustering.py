import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from sklearn.metrics import adjusted_rand_score

from src.learning.detector_clustering import (
    ActiveScoreVector,
    TemplateDetectorSet,
    active_score_matrix,
    active_score_vector,
    affinity,
    affinity_matrix,
    build_template_set,
    farthest_point_seeds,
    select_representatives,
    spectral_cluster,
)
from src.learning.linear_svm import Detector
from src.utils.error_handler import DimensionMismatchError, EmptySequenceError, get_error_accumulator

PLANTED = np.repeat([0, 1, 2], 10)


def _planted_affinity():
    q = np.where(PLANTED[:, None] == PLANTED[None, :], 0.9, 0.1)
    np.fill_diagonal(q, 1.0)
    return q


@pytest.mark.parametrize("seed", range(10))
def test_spectral_clustering_recovers_planted_blocks(seed):
    labels = spectral_cluster(_planted_affinity(), 3, seed=seed)
    assert adjusted_rand_score(PLANTED, labels) == 1.0


def test_spectral_clustering_degenerate_k():
    q = _planted_affinity()
    assert spectral_cluster(q, 1).tolist() == [0] * 30
    assert spectral_cluster(q, 30).tolist() == list(range(30))


@pytest.mark.parametrize("q, k, error", [
    (np.ones((3, 2)), 1, DimensionMismatchError),
    (np.array([[1.0, 0.2], [0.5, 1.0]]), 1, ValueError),
    (np.eye(3), 0, ValueError),
    (np.eye(3), 4, ValueError),
])
def test_spectral_clustering_rejects_bad_input(q, k, error):
    with pytest.raises(error):
        spectral_cluster(q, k)


def test_affinity_of_active_scores(rng):
    r = ActiveScoreVector(np.abs(rng.normal(size=8)))
    assert affinity(r, r) == pytest.approx(1.0)
    assert affinity(r, ActiveScoreVector(np.zeros(8))) == 0.0
    assert affinity(r, ActiveScoreVector(3.0 * r.scores)) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatchError):
        affinity(r, ActiveScoreVector(np.ones(3)))


def test_affinity_matrix_properties(rng):
    active = np.maximum(0.0, rng.normal(size=(6, 20)))
    active[4] = 0.0
    q = affinity_matrix(active)
    assert_allclose(q, q.T)
    assert q.min() >= 0.0 and q.max() <= 1.0
    assert_allclose(np.diag(q), [1, 1, 1, 1, 0, 1])
    assert_allclose(q[4], 0.0)
    assert q[0, 1] == pytest.approx(affinity(ActiveScoreVector(active[0]), ActiveScoreVector(active[1])))


def test_active_scores_are_clipped_at_zero(rng):
    pool = rng.normal(size=(15, 3))
    det = Detector(rng.normal(size=3), -0.2)
    vector = active_score_vector(det, pool)
    assert_allclose(vector.scores, np.maximum(0.0, pool @ det.weight - 0.2))
    assert_allclose(active_score_matrix([det, det], pool)[1], vector.scores)
    assert active_score_vector(Detector(np.ones(3), -1e6), pool).is_zero


def _grouped_problem(rng):
    """Pool points along three axes; detectors aimed at one axis each, plus one that never fires."""
    axes = np.eye(3)
    pool = np.vstack([axes[g] * rng.uniform(1.0, 2.0, size=(10, 1)) + rng.normal(scale=0.05, size=(10, 3))
                      for g in range(3)])
    detectors, groups = [], []
    for g in range(3):
        for k in range(4):
            weight = axes[g] + rng.normal(scale=0.05, size=3)
            detectors.append(Detector(weight / np.linalg.norm(weight), -0.5, source_class=g + 1,
                                      source_instance=f"a{g + 1:02d}_s01_e0{k + 1}", source_frame=k))
            groups.append(g)
    detectors.insert(5, Detector(np.array([1.0, 0.0, 0.0]), -100.0, source_instance="silent"))
    return pool, detectors, np.array(groups)


def test_template_set_drops_silent_detectors_and_recovers_groups(rng):
    pool, detectors, groups = _grouped_problem(rng)
    template = build_template_set(detectors, pool, 3, seed=0)

    assert template.size == 3
    assert 5 not in template.candidate_index.tolist()
    assert len(template.candidate_index) == 12
    assert adjusted_rand_score(groups, template.assignments) == 1.0
    assert sorted(d.source_class for d in template.detectors) == [1, 2, 3]
    assert template.scores(pool).shape == (30, 3)


def test_template_set_clamps_k_with_a_warning(rng):
    pool, detectors, _ = _grouped_problem(rng)
    template = build_template_set(detectors, pool, 50, seed=0)
    assert template.size == 12
    assert any("clamped to 12" in e["error"] for e in get_error_accumulator().get_errors())


def test_template_set_needs_a_firing_detector(rng):
    with pytest.raises(EmptySequenceError):
        build_template_set([], rng.normal(size=(5, 3)), 2)
    with pytest.raises(EmptySequenceError, match="zero active-score"):
        build_template_set([Detector(np.ones(3), -1e6)], rng.normal(size=(5, 3)), 1)


def test_representative_has_the_largest_peak_score():
    detectors = [Detector(np.ones(2), 0.0, source_instance=name, source_frame=0) for name in "abc"]
    active = np.array([[0.1, 0.9], [0.5, 2.0], [3.0, 0.0]])
    template = select_representatives(np.array([0, 0, 2]), detectors, active)

    assert [d.source_instance for d in template.detectors] == ["b", "c"]
    assert template.assignments.tolist() == [0, 0, 1]
    assert any("empty cluster" in e["error"] for e in get_error_accumulator().get_errors())


def test_representative_ties_use_mean_then_provenance():
    detectors = [Detector(np.ones(2), 0.0, source_instance=name, source_frame=f)
                 for name, f in (("b", 0), ("a", 4), ("a", 1))]
    active = np.array([[1.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    assert select_representatives(np.zeros(3, dtype=int), detectors, active).detectors[0].source_instance == "b"
    active[0] = [1.0, 0.0]
    chosen = select_representatives(np.zeros(3, dtype=int), detectors, active).detectors[0]
    assert (chosen.source_instance, chosen.source_frame) == ("a", 1)


def test_template_text_round_trip(rng):
    pool, detectors, _ = _grouped_problem(rng)
    template = build_template_set(detectors, pool, 3, seed=1)
    restored = TemplateDetectorSet.from_text(template.to_text(), template.assignments_text())
    assert np.array_equal(restored.weights, template.weights)
    assert np.array_equal(restored.biases, template.biases)
    assert restored.candidate_index.tolist() == template.candidate_index.tolist()
    assert restored.assignments.tolist() == template.assignments.tolist()


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 30), st.floats(1e-3, 1e3))
def test_affinity_ignores_positive_scaling(seed, length, alpha):
    scores = np.abs(np.random.default_rng(seed).normal(size=length))
    r = ActiveScoreVector(scores)
    other = ActiveScoreVector(np.abs(np.random.default_rng(seed + 1).normal(size=length)))
    assert affinity(r, ActiveScoreVector(alpha * other.scores)) == pytest.approx(affinity(r, other), abs=1e-12)
    assert affinity(ActiveScoreVector(alpha * scores), r) == pytest.approx(1.0)


def test_farthest_point_seeds_are_deterministic_and_spread():
    points = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.0, 5.0]])
    first = farthest_point_seeds(points, 3, seed=2)
    assert first.tolist() == farthest_point_seeds(points, 3, seed=2).tolist()
    assert len(set(first.tolist())) == 3
    # after any start, the next two picks cover the far corners
    assert {2, 3} <= set(first.tolist())


def test_spectral_clustering_is_repeatable_for_a_seed(rng):
    active = np.maximum(0.0, rng.normal(size=(20, 12)))
    q = affinity_matrix(active)
    assert spectral_cluster(q, 4, seed=5).tolist() == spectral_cluster(q, 4, seed=5).tolist()
