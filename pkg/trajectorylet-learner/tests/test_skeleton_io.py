import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.features.skeleton_io import (
    CANONICAL_SUFFIX,
    LimbReference,
    compute_reference_limb_lengths,
    format_canonical,
    hip_centered_frames,
    load_dataset,
    load_instance,
    normalize_skeleton_size,
    parse_canonical,
    parse_msr_filename,
    save_instance,
    traversal_order,
)
from src.utils.error_handler import EmptySequenceError, SkeletonFormatError, TopologyError

CHAIN = ((0, 1), (1, 2), (0, 3))


def _chain_sequence(sequence_factory, rng, frames=4, **kwargs):
    return sequence_factory(rng.normal(size=(frames, 4, 3)), topology=CHAIN, **kwargs)


def test_canonical_round_trip_is_byte_identical(tmp_path, sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng, class_label=3, subject_id=2, trial_id=5, instance_id="x")
    path = save_instance(seq, tmp_path / f"a03_s02_e05{CANONICAL_SUFFIX}")
    loaded = load_instance(path)

    assert loaded.instance_id == "a03_s02_e05"
    assert (loaded.class_label, loaded.subject_id, loaded.trial_id, loaded.hip_index) == (3, 2, 5, 0)
    assert loaded.topology == CHAIN
    assert np.array_equal(loaded.positions, seq.positions)
    assert format_canonical(loaded) == path.read_text(encoding="utf-8")


def test_parse_reports_frame_of_short_frame():
    text = "F=2 J=2 class=1 subject=1 trial=1 hip=0\ntopology= 0:1\n0 0 0\n1 1 1\n2 2 2\n"
    with pytest.raises(SkeletonFormatError) as info:
        parse_canonical(text, "short.skeleton")
    assert info.value.frame == 1
    assert "short.skeleton" in str(info.value)


@pytest.mark.parametrize("body, message", [
    ("0 0 0\n1 x 1\n", "non-numeric"),
    ("0 0 0\n1 1\n", "expected 3 values"),
    ("0 0 0\n1 1 1\n2 2 2\n", "trailing rows"),
])
def test_parse_rejects_malformed_rows(body, message):
    text = "F=1 J=2 class=1 subject=1 trial=1 hip=0\ntopology= 0:1\n" + body
    with pytest.raises(SkeletonFormatError, match=message):
        parse_canonical(text)


def test_parse_rejects_missing_header_key_and_empty_file():
    with pytest.raises(SkeletonFormatError, match="header missing"):
        parse_canonical("F=1 J=2 class=1 subject=1 trial=1\ntopology= 0:1\n0 0 0\n1 1 1\n")
    with pytest.raises(SkeletonFormatError, match="empty file"):
        parse_canonical("")


def test_parse_rejects_non_finite_coordinates():
    text = "F=1 J=2 class=1 subject=1 trial=1 hip=0\ntopology= 0:1\n0 0 0\nnan 1 1\n"
    with pytest.raises(SkeletonFormatError, match="non-finite"):
        parse_canonical(text)


def test_zero_frames_is_an_empty_sequence():
    with pytest.raises(EmptySequenceError):
        parse_canonical("F=0 J=2 class=1 subject=1 trial=1 hip=0\ntopology= 0:1\n")


def test_traversal_order_is_breadth_first_from_hip():
    edges = ((2, 1), (2, 3), (1, 0), (3, 4))
    assert traversal_order(edges, 5, 2) == [(2, 1), (2, 3), (1, 0), (3, 4)]


@pytest.mark.parametrize("edges, joints, hip", [
    (((0, 1), (1, 2)), 4, 0),            # too few edges
    (((0, 1), (2, 1), (0, 3)), 4, 0),    # joint with two parents
    (((0, 1), (1, 0), (2, 3)), 4, 0),    # root as a child
    (((0, 1), (2, 3), (3, 2)), 4, 0),    # unreachable cycle
    (((0, 1),), 2, 5),                   # hip out of range
])
def test_traversal_order_rejects_non_trees(edges, joints, hip):
    with pytest.raises(TopologyError):
        traversal_order(edges, joints, hip)


def test_reference_lengths_are_means_over_all_frames(sequence_factory):
    a = np.zeros((2, 2, 3))
    a[0, 1] = [1, 0, 0]
    a[1, 1] = [3, 0, 0]
    b = np.zeros((1, 2, 3))
    b[0, 1] = [0, 2, 0]
    ref = compute_reference_limb_lengths([sequence_factory(a), sequence_factory(b, instance_id="b")])
    assert ref.topology == ((0, 1),)
    assert_allclose(ref.lengths, [2.0])


def test_reference_lengths_need_training_data():
    with pytest.raises(EmptySequenceError):
        compute_reference_limb_lengths([])


def test_normalized_limbs_match_reference_and_keep_directions(sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng, frames=6)
    ref = LimbReference(CHAIN, np.array([0.5, 0.25, 2.0]))
    out = normalize_skeleton_size(seq, ref)

    assert_allclose(out.positions[:, 0], seq.positions[:, 0])
    for (p, c), length in zip(CHAIN, ref.lengths):
        offset = out.positions[:, c] - out.positions[:, p]
        original = seq.positions[:, c] - seq.positions[:, p]
        assert_allclose(np.linalg.norm(offset, axis=1), length)
        cosine = np.einsum("ij,ij->i", offset, original) / (
            np.linalg.norm(offset, axis=1) * np.linalg.norm(original, axis=1))
        assert_allclose(cosine, 1.0)


def test_normalizing_twice_changes_nothing(sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng, frames=6)
    ref = LimbReference(CHAIN, np.array([0.5, 0.25, 2.0]))
    once = normalize_skeleton_size(seq, ref)
    assert_allclose(normalize_skeleton_size(once, ref).positions, once.positions, atol=1e-12)


def test_skeleton_scaled_about_hip_normalizes_to_the_same_pose(sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng, frames=6)
    hip = seq.positions[:, :1]
    doubled = seq.with_positions(hip + 2.0 * (seq.positions - hip))
    ref = compute_reference_limb_lengths([seq])

    restored = normalize_skeleton_size(doubled, ref)
    assert_allclose(restored.positions, normalize_skeleton_size(seq, ref).positions, atol=1e-12)
    assert_allclose(compute_reference_limb_lengths([doubled]).lengths, 2.0 * ref.lengths)


def test_zero_length_limb_stays_on_parent(sequence_factory):
    positions = np.zeros((1, 2, 3))
    out = normalize_skeleton_size(sequence_factory(positions), LimbReference(((0, 1),), np.array([0.7])))
    assert_allclose(out.positions[0, 1], out.positions[0, 0])


def test_normalize_rejects_topology_mismatch(sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng)
    with pytest.raises(TopologyError):
        normalize_skeleton_size(seq, LimbReference(((0, 1), (0, 2), (0, 3)), np.ones(3)))


def test_hip_centering_is_translation_invariant(sequence_factory, rng):
    seq = _chain_sequence(sequence_factory, rng, frames=5)
    shifted = seq.with_positions(seq.positions + rng.normal(size=(5, 1, 3)))
    centered = hip_centered_frames(seq)
    assert centered.shape == (5, 12)
    assert_allclose(centered[:, :3], 0.0)
    assert_allclose(hip_centered_frames(shifted), centered, atol=1e-12)


def test_load_dataset_sorts_and_applies_exclusion_list(tmp_path, sequence_factory, rng):
    for name in ("a02_s01_e01", "a01_s02_e01", "a01_s01_e01"):
        save_instance(_chain_sequence(sequence_factory, rng, instance_id=name), tmp_path / f"{name}{CANONICAL_SUFFIX}")
    exclusion = tmp_path / "exclude.txt"
    exclusion.write_text("# broken recording\na01_s02_e01  # noisy\n", encoding="utf-8")

    loaded = load_dataset(tmp_path, exclusion_list=exclusion)
    assert [s.instance_id for s in loaded] == ["a01_s01_e01", "a02_s01_e01"]


def test_load_dataset_without_files_fails(tmp_path):
    with pytest.raises(SkeletonFormatError, match="no skeleton files"):
        load_dataset(tmp_path)


def test_msr_filename_pattern():
    assert parse_msr_filename("a12_s03_e02_skeleton3D.txt") == (12, 3, 2)
    assert parse_msr_filename("notes.txt") is None
