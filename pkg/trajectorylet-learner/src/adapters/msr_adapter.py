"""MSR skeleton file adapter

Two text layouts are recognised:

- Action3D: J rows per frame of `x y z confidence`, no header.
- DailyActivity3D: first line `F J`; each frame starts with a row count n
  (2J for one skeleton, 0 if none was tracked, 4J for two), followed by
  n rows where each joint contributes a real-world row and then a screen
  row (`u v depth confidence`).

Labels come from the filename pattern a<class>_s<subject>_e<trial>_skeleton*.txt.
The confidence column is discarded.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.config.datasets import get_topology
from src.features.skeleton_io import SkeletonSequence, parse_msr_filename
from src.utils.error_handler import SkeletonFormatError

logger = logging.getLogger(__name__)

COORDINATE_MODES = ("real_world", "screen")


def _read_rows(path: Path) -> List[List[str]]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        tokens = line.split()
        if tokens:
            rows.append(tokens)
    return rows


def _to_floats(tokens: List[str], path: Path, frame: int, line: int) -> List[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise SkeletonFormatError(f"non-numeric value in {' '.join(tokens)!r}", path=str(path), frame=frame, line=line)


def _to_count(tokens: List[str], path: Path, line: int, frame: Optional[int] = None) -> int:
    try:
        count = int(tokens[0])
    except ValueError:
        raise SkeletonFormatError(f"expected an integer count, got {tokens[0]!r}", path=str(path), frame=frame, line=line)
    if count < 0:
        raise SkeletonFormatError(f"negative count {count}", path=str(path), frame=frame, line=line)
    return count


def _parse_action3d(rows: List[List[str]], joint_count: int, path: Path) -> np.ndarray:
    for index, tokens in enumerate(rows):
        if len(tokens) != 4:
            raise SkeletonFormatError(f"expected 4 values per joint row, got {len(tokens)}",
                                      path=str(path), frame=index // joint_count, line=index + 1)
    if len(rows) % joint_count:
        frame = len(rows) // joint_count
        raise SkeletonFormatError(
            f"frame has {len(rows) % joint_count} joint rows, expected {joint_count}",
            path=str(path), frame=frame)

    values = np.array([_to_floats(t, path, i // joint_count, i + 1) for i, t in enumerate(rows)])
    return values[:, :3].reshape(-1, joint_count, 3)


def _parse_daily_activity(rows: List[List[str]], joint_count: int, coordinates: str, path: Path) -> np.ndarray:
    header = rows[0]
    declared_frames, declared_joints = _to_count(header[:1], path, 1), _to_count(header[1:2], path, 1)
    if declared_joints != joint_count:
        raise SkeletonFormatError(f"file declares {declared_joints} joints, topology has {joint_count}",
                                  path=str(path), line=1)

    offset = 0 if coordinates == "real_world" else 1
    frames = []
    cursor = 1
    for frame in range(declared_frames):
        if cursor >= len(rows):
            raise SkeletonFormatError("file ends before the declared frame count", path=str(path), frame=frame)
        count_line = cursor + 1
        if len(rows[cursor]) != 1:
            raise SkeletonFormatError(f"expected a row count, got {len(rows[cursor])} values",
                                      path=str(path), frame=frame, line=count_line)
        row_count = _to_count(rows[cursor], path, count_line, frame)
        body = rows[cursor + 1: cursor + 1 + row_count]
        cursor += 1 + row_count
        if row_count == 0:
            logger.debug(f"{path.name}: frame {frame} has no tracked skeleton, skipped")
            continue
        if row_count % (2 * joint_count) or len(body) != row_count:
            raise SkeletonFormatError(f"frame has {len(body)} rows, expected a multiple of {2 * joint_count}",
                                      path=str(path), frame=frame, line=count_line)
        # First tracked skeleton only
        joints = []
        for j in range(joint_count):
            tokens = body[2 * j + offset]
            line = count_line + 1 + 2 * j + offset
            if len(tokens) != 4:
                raise SkeletonFormatError(f"expected 4 values per joint row, got {len(tokens)}",
                                          path=str(path), frame=frame, line=line)
            joints.append(_to_floats(tokens, path, frame, line)[:3])
        frames.append(joints)

    if not frames:
        raise SkeletonFormatError("no frame contains a tracked skeleton", path=str(path))
    return np.array(frames)


def _is_daily_activity(rows: List[List[str]]) -> bool:
    return len(rows[0]) == 2 and all(t.lstrip("-").isdigit() for t in rows[0])


def load_msr_skeleton(
    path: Union[str, Path],
    coordinates: str = "real_world",
    topology_name: str = "msr_action3d",
) -> SkeletonSequence:
    """Parse an MSR skeleton file into a SkeletonSequence."""
    path = Path(path)
    if coordinates not in COORDINATE_MODES:
        raise SkeletonFormatError(f"coordinates must be one of {COORDINATE_MODES}", path=str(path))

    labels = parse_msr_filename(path.name)
    if labels is None:
        raise SkeletonFormatError("filename does not match a<class>_s<subject>_e<trial>_skeleton*.txt",
                                  path=str(path))
    class_label, subject_id, trial_id = labels

    joint_count, hip_index, edges = get_topology(topology_name)
    rows = _read_rows(path)
    if not rows:
        raise SkeletonFormatError("empty file", path=str(path))

    if _is_daily_activity(rows):
        positions = _parse_daily_activity(rows, joint_count, coordinates, path)
    else:
        positions = _parse_action3d(rows, joint_count, path)

    instance_id = f"a{class_label:02d}_s{subject_id:02d}_e{trial_id:02d}"
    return SkeletonSequence(
        positions=positions,
        class_label=class_label,
        subject_id=subject_id,
        trial_id=trial_id,
        hip_index=hip_index,
        topology=tuple(edges),
        instance_id=instance_id,
    )


def convert_directory(source: Union[str, Path], target: Union[str, Path], coordinates: str = "real_world",
                      topology_name: str = "msr_action3d") -> Tuple[int, List[str]]:
    """
    Convert every MSR skeleton file in `source` to canonical files in `target`.

    Returns:
        (converted count, list of failure messages)
    """
    from src.features.skeleton_io import CANONICAL_SUFFIX, save_instance

    source, target = Path(source), Path(target)
    converted, failures = 0, []
    for file in sorted(source.glob("a*_s*_e*_skeleton*.txt")):
        try:
            seq = load_msr_skeleton(file, coordinates=coordinates, topology_name=topology_name)
        except SkeletonFormatError as e:
            failures.append(str(e))
            logger.warning(f"⚠️  {e}")
            continue
        save_instance(seq, target / f"{seq.instance_id}{CANONICAL_SUFFIX}")
        converted += 1
    logger.info(f"✅ Converted {converted} MSR files into {target}")
    return converted, failures
