"""Skeleton sequences: loading, size normalization and hip-centering

Canonical file layout (UTF-8, one instance per file):

    F=<int> J=<int> class=<int> subject=<int> trial=<int> hip=<int>
    topology= p1:c1 p2:c2 ...
    x y z            (F*J rows, frames in order, joints in index order)

Coordinates are written with Python's shortest round-trip float repr, so a
file produced by save_instance reloads and re-serializes byte-for-byte.
"""

import logging
import re
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.error_handler import EmptySequenceError, SkeletonFormatError, TopologyError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

CANONICAL_SUFFIX = ".skeleton"
_HEADER_KEYS = ("F", "J", "class", "subject", "trial", "hip")


@dataclass(frozen=True)
class JointFrame:
    """One frame: J joint positions in meters."""
    joints: np.ndarray  # (J, 3)
    timestamp_index: int = 0

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=float)
        if joints.ndim != 2 or joints.shape[1] != 3:
            raise SkeletonFormatError(f"frame must be (J, 3), got {joints.shape}", frame=self.timestamp_index)
        if joints.shape[0] < 2:
            raise SkeletonFormatError("a frame needs a hip joint plus at least one other", frame=self.timestamp_index)
        if not np.all(np.isfinite(joints)):
            raise SkeletonFormatError("non-finite joint coordinate", frame=self.timestamp_index)
        object.__setattr__(self, "joints", joints)

    @property
    def joint_count(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True)
class SkeletonSequence:
    """An action instance: F frames x J joints plus labels and topology."""
    positions: np.ndarray  # (F, J, 3)
    class_label: int
    subject_id: int
    trial_id: int
    hip_index: int
    topology: Tuple[Edge, ...]
    instance_id: str = ""

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 3 or positions.shape[2] != 3:
            raise SkeletonFormatError(f"positions must be (F, J, 3), got {positions.shape}", path=self.instance_id)
        if positions.shape[0] < 1:
            raise EmptySequenceError(f"instance {self.instance_id!r} has no frames")
        if positions.shape[1] < 2:
            raise SkeletonFormatError("a skeleton needs at least 2 joints", path=self.instance_id)
        if not np.all(np.isfinite(positions)):
            bad = int(np.argwhere(~np.isfinite(positions))[0][0])
            raise SkeletonFormatError("non-finite joint coordinate", path=self.instance_id, frame=bad)
        positions.setflags(write=False)
        topology = tuple((int(p), int(c)) for p, c in self.topology)
        traversal_order(topology, positions.shape[1], self.hip_index)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "topology", topology)

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def joint_count(self) -> int:
        return self.positions.shape[1]

    @property
    def frames(self) -> List[JointFrame]:
        return [JointFrame(self.positions[t], t) for t in range(self.frame_count)]

    def with_positions(self, positions: np.ndarray) -> "SkeletonSequence":
        return replace(self, positions=np.array(positions, dtype=float))


@dataclass(frozen=True)
class LimbReference:
    """Reference length (meters) per topology edge, learned from training data."""
    topology: Tuple[Edge, ...]
    lengths: np.ndarray = field(repr=False)

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float)
        if lengths.shape != (len(self.topology),):
            raise TopologyError(f"expected {len(self.topology)} limb lengths, got {lengths.shape}")
        if not np.all(np.isfinite(lengths)) or np.any(lengths < 0):
            raise TopologyError("limb lengths must be finite and >= 0")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "topology", tuple((int(p), int(c)) for p, c in self.topology))

    def to_text(self) -> str:
        rows = [f"{p}:{c} {length!r}" for (p, c), length in zip(self.topology, self.lengths.tolist())]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LimbReference":
        topology, lengths = [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            edge, value = line.split()
            p, c = edge.split(":")
            topology.append((int(p), int(c)))
            lengths.append(float(value))
        return cls(tuple(topology), np.array(lengths))


def traversal_order(topology: Sequence[Edge], joint_count: int, hip_index: int) -> List[Edge]:
    """
    Return the edges in breadth-first order from the hip.

    Raises TopologyError unless the edges form a spanning tree rooted at hip_index.
    """
    if not 0 <= hip_index < joint_count:
        raise TopologyError(f"hip index {hip_index} outside [0, {joint_count})")
    if len(topology) != joint_count - 1:
        raise TopologyError(f"topology has {len(topology)} edges, expected {joint_count - 1}")

    children = {j: [] for j in range(joint_count)}
    parents = {}
    for p, c in topology:
        if not (0 <= p < joint_count and 0 <= c < joint_count):
            raise TopologyError(f"edge {p}:{c} references a joint outside [0, {joint_count})")
        if c in parents or c == hip_index:
            raise TopologyError(f"joint {c} has more than one parent or is the root")
        parents[c] = p
        children[p].append(c)

    order: List[Edge] = []
    queue = deque([hip_index])
    seen = {hip_index}
    while queue:
        parent = queue.popleft()
        for child in children[parent]:
            if child in seen:
                raise TopologyError("topology contains a cycle")
            seen.add(child)
            order.append((parent, child))
            queue.append(child)

    if len(seen) != joint_count:
        raise TopologyError(f"topology does not reach joints {sorted(set(range(joint_count)) - seen)}")
    return order


# ============================================================================
# Canonical format
# ============================================================================

def _parse_header(line: str, path: str) -> dict:
    fields = {}
    for token in line.split():
        if "=" not in token:
            raise SkeletonFormatError(f"malformed header token {token!r}", path=path, line=1)
        key, value = token.split("=", 1)
        try:
            fields[key] = int(value)
        except ValueError:
            raise SkeletonFormatError(f"header value {token!r} is not an integer", path=path, line=1)
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise SkeletonFormatError(f"header missing {missing}", path=path, line=1)
    return fields


def _parse_topology(line: str, path: str) -> Tuple[Edge, ...]:
    if not line.startswith("topology="):
        raise SkeletonFormatError("second line must start with 'topology='", path=path, line=2)
    edges = []
    for token in line[len("topology="):].split():
        try:
            p, c = token.split(":")
            edges.append((int(p), int(c)))
        except ValueError:
            raise SkeletonFormatError(f"malformed topology pair {token!r}", path=path, line=2)
    return tuple(edges)


def parse_canonical(text: str, path: str = "<string>", instance_id: str = "") -> SkeletonSequence:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SkeletonFormatError("empty file", path=path)
    if len(lines) < 2:
        raise SkeletonFormatError("missing topology line", path=path)

    header = _parse_header(lines[0], path)
    topology = _parse_topology(lines[1], path)
    frame_count, joint_count = header["F"], header["J"]
    if frame_count < 1:
        raise EmptySequenceError(f"{path}: header declares F={frame_count}")

    rows = [ln for ln in lines[2:] if ln.strip()]
    positions = np.empty((frame_count, joint_count, 3))
    for k in range(frame_count * joint_count):
        frame, joint = divmod(k, joint_count)
        if k >= len(rows):
            raise SkeletonFormatError(
                f"frame has {len(rows) - frame * joint_count} joint rows, expected {joint_count}",
                path=path, frame=frame)
        values = rows[k].split()
        if len(values) != 3:
            raise SkeletonFormatError(f"expected 3 values, got {len(values)}", path=path, frame=frame, line=k + 3)
        try:
            positions[frame, joint] = [float(v) for v in values]
        except ValueError:
            raise SkeletonFormatError(f"non-numeric coordinate in {rows[k]!r}", path=path, frame=frame, line=k + 3)
    if len(rows) > frame_count * joint_count:
        raise SkeletonFormatError(
            f"{len(rows) - frame_count * joint_count} trailing rows beyond F*J", path=path)

    return SkeletonSequence(
        positions=positions,
        class_label=header["class"],
        subject_id=header["subject"],
        trial_id=header["trial"],
        hip_index=header["hip"],
        topology=topology,
        instance_id=instance_id,
    )


def format_canonical(seq: SkeletonSequence) -> str:
    header = (f"F={seq.frame_count} J={seq.joint_count} class={seq.class_label} "
              f"subject={seq.subject_id} trial={seq.trial_id} hip={seq.hip_index}")
    topology = "topology= " + " ".join(f"{p}:{c}" for p, c in seq.topology)
    rows = [" ".join(repr(float(v)) for v in joint) for joint in seq.positions.reshape(-1, 3).tolist()]
    return "\n".join([header, topology, *rows]) + "\n"


def save_instance(seq: SkeletonSequence, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_canonical(seq), encoding="utf-8")
    return path


def load_instance(
    path: Union[str, Path],
    format: str = "canonical",
    coordinates: str = "real_world",
    topology_name: str = "msr_action3d",
) -> SkeletonSequence:
    """
    Load one skeleton sequence.

    Args:
        path: skeleton file
        format: "canonical" or "msr_skeleton"
        coordinates: for MSR files with interleaved rows, "real_world" or "screen"
        topology_name: joint topology preset applied to MSR files

    Raises:
        SkeletonFormatError: on any parse failure
    """
    path = Path(path)
    if not path.is_file():
        raise SkeletonFormatError("file not found", path=str(path))

    if format == "canonical":
        return parse_canonical(path.read_text(encoding="utf-8"), str(path), instance_id=_instance_id(path))
    if format == "msr_skeleton":
        from src.adapters.msr_adapter import load_msr_skeleton
        return load_msr_skeleton(path, coordinates=coordinates, topology_name=topology_name)
    raise SkeletonFormatError(f"unknown format {format!r}", path=str(path))


def _instance_id(path: Path) -> str:
    name = path.name
    if name.endswith(CANONICAL_SUFFIX):
        return name[: -len(CANONICAL_SUFFIX)]
    return path.stem


def read_exclusion_list(path: Optional[Union[str, Path]]) -> set:
    """One instance id per line; '#' starts a comment."""
    if not path:
        return set()
    excluded = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip()
        if entry:
            excluded.add(entry)
    return excluded


def load_dataset(
    directory: Union[str, Path],
    format: str = "canonical",
    exclusion_list: Optional[Union[str, Path]] = None,
    coordinates: str = "real_world",
    topology_name: str = "msr_action3d",
) -> List[SkeletonSequence]:
    """Load every instance in a directory, sorted by instance id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SkeletonFormatError("dataset directory not found", path=str(directory))

    if format == "canonical":
        files = sorted(directory.glob(f"*{CANONICAL_SUFFIX}"))
    else:
        files = sorted(directory.glob("a*_s*_e*_skeleton*.txt"))

    excluded = read_exclusion_list(exclusion_list)
    sequences = []
    for file in files:
        seq = load_instance(file, format=format, coordinates=coordinates, topology_name=topology_name)
        if seq.instance_id in excluded:
            logger.info(f"Excluding {seq.instance_id} (exclusion list)")
            continue
        sequences.append(seq)

    if not sequences:
        raise SkeletonFormatError("no skeleton files found", path=str(directory))
    logger.info(f"📂 Loaded {len(sequences)} instances from {directory}")
    return sequences


# ============================================================================
# Size normalization and hip-centering
# ============================================================================

def _edge_lengths(seq: SkeletonSequence) -> np.ndarray:
    """(F, J-1) Euclidean edge lengths in topology order."""
    parents = np.array([p for p, _ in seq.topology])
    children = np.array([c for _, c in seq.topology])
    return np.linalg.norm(seq.positions[:, children] - seq.positions[:, parents], axis=2)


def compute_reference_limb_lengths(training: Iterable[SkeletonSequence]) -> LimbReference:
    """Per-edge mean length over every frame of every training instance."""
    training = list(training)
    if not training:
        raise EmptySequenceError("cannot compute reference limb lengths from an empty training list")

    topology = training[0].topology
    total = np.zeros(len(topology))
    frames = 0
    for seq in training:
        if seq.topology != topology or seq.hip_index != training[0].hip_index:
            raise TopologyError(f"instance {seq.instance_id!r} has a different topology")
        total += _edge_lengths(seq).sum(axis=0)
        frames += seq.frame_count

    return LimbReference(topology, total / frames)


def normalize_skeleton_size(seq: SkeletonSequence, ref: LimbReference) -> SkeletonSequence:
    """
    Rebuild each frame outward from the hip with reference limb lengths.

    Edge directions are kept; a zero-length limb leaves the child on its parent.
    """
    if seq.topology != ref.topology:
        raise TopologyError(f"instance {seq.instance_id!r} topology does not match the limb reference")

    length_of = {edge: length for edge, length in zip(ref.topology, ref.lengths)}
    source = seq.positions
    out = np.empty_like(source)
    out[:, seq.hip_index] = source[:, seq.hip_index]

    for parent, child in traversal_order(seq.topology, seq.joint_count, seq.hip_index):
        offset = source[:, child] - source[:, parent]
        norm = np.linalg.norm(offset, axis=1, keepdims=True)
        direction = np.divide(offset, norm, out=np.zeros_like(offset), where=norm > 0)
        out[:, child] = out[:, parent] + length_of[(parent, child)] * direction

    return seq.with_positions(out)


def center_at_hip(frame: Union[JointFrame, np.ndarray], hip_index: int) -> np.ndarray:
    """[j_1 - j_hip, ..., j_J - j_hip] as a 3J vector."""
    joints = frame.joints if isinstance(frame, JointFrame) else np.asarray(frame, dtype=float)
    if not 0 <= hip_index < joints.shape[0]:
        raise TopologyError(f"hip index {hip_index} outside [0, {joints.shape[0]})")
    return (joints - joints[hip_index]).reshape(-1)


def hip_centered_frames(seq: SkeletonSequence) -> np.ndarray:
    """(F, 3J) hip-centered frame vectors for a whole sequence."""
    centered = seq.positions - seq.positions[:, seq.hip_index:seq.hip_index + 1]
    return centered.reshape(seq.frame_count, -1)


_MSR_NAME = re.compile(r"a(\d+)_s(\d+)_e(\d+)_skeleton", re.IGNORECASE)


def parse_msr_filename(name: str) -> Optional[Tuple[int, int, int]]:
    """(class, subject, trial) from the a<class>_s<subject>_e<trial>_skeleton pattern."""
    match = _MSR_NAME.search(name)
    if not match:
        return None
    return int(match.group(1)), int(match.group(2)), int(match.group(3))
