import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from src.features.trajectorylet import InstanceTrajectorylets
from src.learning.detector_clustering import TemplateDetectorSet
from src.learning.encoding import (
    ActionEncoding,
    encode,
    encode_batch,
    encode_pyramid,
    encoding_dimension,
    encoding_matrix,
    pyramid_segments,
    read_encodings,
    write_encodings,
)
from src.learning.linear_svm import Detector
from src.utils.error_handler import ConfigurationError, DimensionMismatchError, EmptySequenceError


def _template(rng, k, dim):
    detectors = tuple(Detector(rng.normal(size=dim), float(rng.normal())) for _ in range(k))
    return TemplateDetectorSet(detectors, np.arange(k), np.arange(k))


def _problem(seed, k, n, dim=4):
    rng = np.random.default_rng(seed)
    return rng, _template(rng, k, dim), rng.normal(size=(n, dim))


PROBLEMS = st.tuples(st.integers(0, 2 ** 32 - 1), st.integers(1, 12), st.integers(1, 30))


@settings(max_examples=1000, deadline=None)
@given(PROBLEMS)
def test_duplicating_a_trajectorylet_keeps_the_encoding(problem):
    rng, template, values = _problem(*problem)
    duplicated = np.vstack([values, values[rng.integers(values.shape[0])]])
    assert_allclose(encode(template, duplicated).values, encode(template, values).values, rtol=0, atol=1e-12)


@settings(max_examples=1000, deadline=None)
@given(PROBLEMS)
def test_flat_encoding_ignores_trajectorylet_order(problem):
    rng, template, values = _problem(*problem)
    shuffled = values[rng.permutation(values.shape[0])]
    assert_allclose(encode(template, shuffled).values, encode(template, values).values, rtol=0, atol=1e-12)


@settings(max_examples=1000, deadline=None)
@given(PROBLEMS, st.integers(1, 4))
def test_pyramid_dimension_and_first_level(problem, levels):
    _, template, values = _problem(*problem)
    k = template.size
    encoding = encode_pyramid(template, values, levels)
    assert encoding.dim == encoding_dimension(k, levels) == k * (2 ** levels - 1)
    assert np.array_equal(encoding.values[:k], encode(template, values).values)
    if levels == 1:
        assert np.array_equal(encoding.values, encode(template, values).values)


def test_flat_encoding_is_per_detector_maximum():
    template = TemplateDetectorSet((Detector(np.array([1.0, 0.0]), 0.5), Detector(np.array([0.0, -1.0]), 0.0)),
                                   np.arange(2), np.arange(2))
    values = np.array([[1.0, 2.0], [-3.0, -1.0], [0.0, 0.5]])
    assert encode(template, values).values.tolist() == [1.5, 1.0]


def test_pyramid_segments_split_left_heavy():
    assert pyramid_segments(5, 3) == [(0, 5), (0, 3), (3, 5), (0, 2), (2, 3), (3, 4), (4, 5)]
    assert pyramid_segments(7, 1) == [(0, 7)]
    with pytest.raises(ConfigurationError):
        pyramid_segments(5, 0)


def test_empty_pyramid_segments_take_whole_instance_values(rng):
    template = _template(rng, 3, 4)
    values = rng.normal(size=(2, 4))
    encoding = encode_pyramid(template, values, 3).values.reshape(7, 3)
    whole = encode(template, values).values
    # segments of 2 indices at level 3: [0,1) [1,1) [1,2) [2,2)
    assert_allclose(encoding[4], whole)
    assert_allclose(encoding[6], whole)
    assert_allclose(encoding[3], template.scores(values[:1])[0])


def test_encoding_errors(rng):
    template = _template(rng, 2, 4)
    with pytest.raises(EmptySequenceError):
        encode(template, np.zeros((0, 4)))
    with pytest.raises(DimensionMismatchError):
        encode(template, rng.normal(size=(3, 5)))


def test_batch_keeps_order_and_metadata(rng):
    template = _template(rng, 3, 4)
    instances = [InstanceTrajectorylets(f"a0{c}_s01_e01", c, 1, rng.normal(size=(6, 4))) for c in (2, 1, 3)]
    flat = encode_batch(template, instances)
    pyramid = encode_batch(template, instances, levels=2)

    assert [e.instance_id for e in flat] == [inst.instance_id for inst in instances]
    assert [e.label for e in pyramid] == [2, 1, 3]
    assert encoding_matrix(pyramid).shape == (3, 9)
    assert all(e.levels == 2 for e in pyramid)


def test_encodings_text_round_trip(tmp_path, rng):
    encodings = [ActionEncoding(rng.normal(size=5), label=3), ActionEncoding(rng.normal(size=5))]
    loaded = read_encodings(write_encodings(encodings, tmp_path / "train_encodings.txt"))
    assert [e.label for e in loaded] == [3, None]
    for original, copy in zip(encodings, loaded):
        assert np.array_equal(copy.values, original.values)


@settings(max_examples=500, deadline=None)
@given(PROBLEMS, st.integers(1, 10))
def test_adding_trajectorylets_never_lowers_the_encoding(problem, extra):
    rng, template, values = _problem(*problem)
    grown = np.vstack([values, rng.normal(size=(extra, values.shape[1]))])
    assert np.all(encode(template, grown).values >= encode(template, values).values)


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8), st.integers(1, 10), st.integers(1, 4))
def test_segment_maxima_never_exceed_the_whole_sequence(seed, k, n, levels):
    # n as small as 1 leaves most segments of a deep pyramid empty
    _, template, values = _problem(seed, k, n)
    encoding = encode_pyramid(template, values, levels).values.reshape(-1, k)
    assert np.all(encoding[1:] <= encoding[0])
