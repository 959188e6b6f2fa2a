import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.adapters.msr_adapter import convert_directory, load_msr_skeleton
from src.features.skeleton_io import load_dataset, load_instance
from src.utils.error_handler import SkeletonFormatError

JOINTS = 20


def _write_action3d(path, positions):
    rows = [f"{x} {y} {z} 1.0" for x, y, z in positions.reshape(-1, 3).tolist()]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def test_action3d_rows_become_frames(tmp_path, rng):
    positions = rng.normal(size=(3, JOINTS, 3))
    path = tmp_path / "a01_s02_e03_skeleton3D.txt"
    _write_action3d(path, positions)

    seq = load_msr_skeleton(path)
    assert (seq.class_label, seq.subject_id, seq.trial_id) == (1, 2, 3)
    assert seq.instance_id == "a01_s02_e03"
    assert seq.hip_index == 6
    assert seq.positions.shape == (3, JOINTS, 3)
    assert_allclose(seq.positions, positions)


def test_action3d_partial_frame_is_reported(tmp_path, rng):
    path = tmp_path / "a01_s01_e01_skeleton3D.txt"
    _write_action3d(path, rng.normal(size=(2, JOINTS, 3))[:, :15])
    with pytest.raises(SkeletonFormatError) as info:
        load_msr_skeleton(path)
    assert info.value.frame == 1


def _write_daily_activity(path, real, screen):
    lines = [f"3 {JOINTS}", str(2 * JOINTS)]
    for r, s in zip(real.tolist(), screen.tolist()):
        lines.append(" ".join(str(v) for v in r) + " 0")
        lines.append(" ".join(str(v) for v in s) + " 0")
    lines.append("0")
    lines.append(str(2 * JOINTS))
    for r, s in zip((real + 1).tolist(), (screen + 1).tolist()):
        lines.append(" ".join(str(v) for v in r) + " 0")
        lines.append(" ".join(str(v) for v in s) + " 0")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.mark.parametrize("coordinates", ["real_world", "screen"])
def test_daily_activity_selects_coordinate_rows_and_skips_untracked(tmp_path, rng, coordinates):
    real, screen = rng.normal(size=(JOINTS, 3)), rng.normal(size=(JOINTS, 3)) + 10
    path = tmp_path / "a04_s05_e01_skeleton.txt"
    _write_daily_activity(path, real, screen)

    seq = load_msr_skeleton(path, coordinates=coordinates)
    expected = real if coordinates == "real_world" else screen
    assert seq.frame_count == 2
    assert_allclose(seq.positions[0], expected)
    assert_allclose(seq.positions[1], expected + 1)


def test_filename_without_labels_is_rejected(tmp_path, rng):
    path = tmp_path / "recording.txt"
    _write_action3d(path, rng.normal(size=(1, JOINTS, 3)))
    with pytest.raises(SkeletonFormatError, match="filename"):
        load_msr_skeleton(path)


def test_convert_directory_writes_canonical_and_collects_failures(tmp_path, rng):
    source, target = tmp_path / "msr", tmp_path / "canonical"
    source.mkdir()
    positions = rng.normal(size=(4, JOINTS, 3))
    _write_action3d(source / "a02_s01_e01_skeleton3D.txt", positions)
    (source / "a03_s01_e01_skeleton3D.txt").write_text("1 2 x 4\n" * JOINTS, encoding="utf-8")

    converted, failures = convert_directory(source, target)
    assert converted == 1
    assert len(failures) == 1 and "a03_s01_e01" in failures[0]

    (seq,) = load_dataset(target)
    assert seq.instance_id == "a02_s01_e01"
    assert_allclose(seq.positions, positions)


def test_load_instance_dispatches_msr_format(tmp_path, rng):
    path = tmp_path / "a01_s01_e02_skeleton3D.txt"
    _write_action3d(path, rng.normal(size=(2, JOINTS, 3)))
    assert load_instance(path, format="msr_skeleton").trial_id == 2
    assert np.isfinite(load_dataset(tmp_path, format="msr_skeleton")[0].positions).all()


def test_daily_activity_bad_row_count_reports_its_line(tmp_path, rng):
    path = tmp_path / "a04_s05_e01_skeleton.txt"
    _write_daily_activity(path, rng.normal(size=(JOINTS, 3)), rng.normal(size=(JOINTS, 3)))
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[2 + 2 * JOINTS] = "zero"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with pytest.raises(SkeletonFormatError, match="integer count") as info:
        load_msr_skeleton(path)
    assert (info.value.frame, info.value.line) == (1, 3 + 2 * JOINTS)


def test_daily_activity_bad_joint_row_reports_its_line(tmp_path, rng):
    path = tmp_path / "a04_s05_e01_skeleton.txt"
    _write_daily_activity(path, rng.normal(size=(JOINTS, 3)), rng.normal(size=(JOINTS, 3)))
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[4] = "1.0 nan? 2.0 0"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with pytest.raises(SkeletonFormatError) as info:
        load_msr_skeleton(path)
    assert (info.value.frame, info.value.line) == (0, 5)


def test_convert_directory_skips_malformed_daily_activity(tmp_path, rng):
    source, target = tmp_path / "msr", tmp_path / "canonical"
    source.mkdir()
    _write_daily_activity(source / "a01_s01_e01_skeleton.txt", rng.normal(size=(JOINTS, 3)),
                          rng.normal(size=(JOINTS, 3)))
    (source / "a02_s01_e01_skeleton.txt").write_text(f"3 {JOINTS}\nforty\n", encoding="utf-8")

    converted, failures = convert_directory(source, target)
    assert converted == 1
    assert len(failures) == 1 and "a02_s01_e01" in failures[0] and "line=2" in failures[0]
