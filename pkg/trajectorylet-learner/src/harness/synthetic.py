"""Synthetic planted-motif skeleton datasets

Every instance shares one idle motion (each limb sways on its own phase) and
carries a single class-specific motif: one limb swings about a class axis
for `motif_length` frames at a random temporal position. Subjects differ in
limb scale, and every instance drifts through space, so recovering the class
needs size normalization, hip-centering and a detector that fires on the
short motif window.

Files are written in the canonical format plus a `motifs.txt` manifest with
one `instance start duration` line per instance.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from src.config.datasets import get_topology
from src.features.skeleton_io import CANONICAL_SUFFIX, Edge, SkeletonSequence, save_instance, traversal_order
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)

MOTIF_MANIFEST = "motifs.txt"

# Humanoid rest pose for the 8-joint preset: edge -> (direction, length in m)
_REST_POSE_8 = {
    (0, 1): ((0.0, 1.0, 0.0), 0.45),
    (1, 2): ((0.0, 1.0, 0.0), 0.25),
    (1, 3): ((-0.8, -0.6, 0.0), 0.30),
    (3, 4): ((0.0, -1.0, 0.1), 0.28),
    (1, 5): ((0.8, -0.6, 0.0), 0.30),
    (5, 6): ((0.0, -1.0, 0.1), 0.28),
    (0, 7): ((0.0, -1.0, 0.0), 0.45),
}

IDLE_AMPLITUDE = 0.15  # rad
IDLE_PERIOD = (20.0, 40.0)  # frames
MOTIF_AMPLITUDE = 1.2  # rad
LIMB_SCALE = (0.85, 1.15)
HIP_DRIFT = 0.005  # m / frame


@dataclass(frozen=True)
class SyntheticSpec:
    class_count: int = 4
    instances_per_class: int = 40
    joint_count: int = 8
    min_frames: int = 30
    max_frames: int = 50
    noise: float = 0.01
    motif_length: int = 5
    subject_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigurationError(f"class_count must be >= 2, got {self.class_count}")
        if self.instances_per_class < 1:
            raise ConfigurationError("instances_per_class must be >= 1")
        if self.joint_count < 2:
            raise ConfigurationError("joint_count must be >= 2")
        if self.motif_length < 1:
            raise ConfigurationError("motif_length must be >= 1")
        if not self.motif_length <= self.min_frames <= self.max_frames:
            raise ConfigurationError(
                f"need motif_length <= min_frames <= max_frames, got "
                f"{self.motif_length}, {self.min_frames}, {self.max_frames}")
        if self.noise < 0:
            raise ConfigurationError("noise must be >= 0")
        if self.subject_count < 2:
            raise ConfigurationError("subject_count must be >= 2 so train and test subjects exist")


@dataclass
class SyntheticDataset:
    sequences: List[SkeletonSequence]
    motifs: Dict[str, Tuple[int, int]] = field(default_factory=dict)  # instance id -> (start, duration)

    def manifest_text(self) -> str:
        return "".join(f"{iid} {start} {duration}\n" for iid, (start, duration) in sorted(self.motifs.items()))


def synthetic_topology(joint_count: int) -> Tuple[int, Tuple[Edge, ...]]:
    """(hip index, edges): the 8-joint preset, else a binary tree rooted at joint 0."""
    if joint_count == 8:
        _, hip, edges = get_topology("synthetic8")
        return hip, tuple(edges)
    return 0, tuple(((j - 1) // 2, j) for j in range(1, joint_count))


def _rest_pose(edges: Sequence[Edge], rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if set(edges) == set(_REST_POSE_8):
        directions = np.array([_REST_POSE_8[e][0] for e in edges], dtype=float)
        lengths = np.array([_REST_POSE_8[e][1] for e in edges])
    else:
        directions = rng.normal(size=(len(edges), 3))
        lengths = rng.uniform(0.2, 0.4, size=len(edges))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True), lengths


def _motif_axis(direction: np.ndarray, turn: int) -> np.ndarray:
    """Unit axis orthogonal to the limb; `turn` picks one of three orientations."""
    helper = np.eye(3)[int(np.argmin(np.abs(direction)))]
    first = np.cross(direction, helper)
    first /= np.linalg.norm(first)
    second = np.cross(direction, first)
    angle = np.pi * (turn % 3) / 3.0
    return np.cos(angle) * first + np.sin(angle) * second


def _class_motifs(class_count: int, directions: np.ndarray) -> List[Tuple[int, np.ndarray]]:
    """(edge position, rotation axis) per class; leaf-most edges first."""
    edge_count = directions.shape[0]
    motifs = []
    for c in range(class_count):
        position = edge_count - 1 - (c % edge_count)
        turn = c // edge_count
        sign = -1.0 if turn % 2 else 1.0
        motifs.append((position, sign * _motif_axis(directions[position], turn)))
    return motifs


def _pose_instance(
    frame_count: int,
    hip_index: int,
    edges: Sequence[Edge],
    order: Sequence[Edge],
    directions: np.ndarray,
    lengths: np.ndarray,
    motif: Tuple[int, np.ndarray],
    motif_start: int,
    motif_length: int,
    rng: np.random.Generator,
) -> np.ndarray:
    t = np.arange(frame_count, dtype=float)
    joint_count = len(edges) + 1
    positions = np.zeros((frame_count, joint_count, 3))
    positions[:, hip_index] = rng.uniform(-0.5, 0.5, size=3) + np.outer(t, rng.normal(0.0, HIP_DRIFT, size=3))

    edge_position = {edge: i for i, edge in enumerate(edges)}
    motif_edge, motif_axis = motif
    window = np.zeros(frame_count)
    u = (np.arange(motif_length) + 1.0) / (motif_length + 1.0)
    window[motif_start:motif_start + motif_length] = MOTIF_AMPLITUDE * np.sin(np.pi * u)

    for parent, child in order:
        i = edge_position[(parent, child)]
        sway_axis = rng.normal(size=3)
        sway_axis /= np.linalg.norm(sway_axis)
        period = rng.uniform(*IDLE_PERIOD)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sway = IDLE_AMPLITUDE * np.sin(2.0 * np.pi * t / period + phase)
        rotation = Rotation.from_rotvec(sway[:, None] * sway_axis)
        if i == motif_edge:
            rotation = Rotation.from_rotvec(window[:, None] * motif_axis) * rotation
        positions[:, child] = positions[:, parent] + lengths[i] * rotation.apply(directions[i])

    return positions


def generate_synthetic(
    spec: SyntheticSpec,
    output_dir: Optional[Union[str, Path]] = None,
) -> SyntheticDataset:
    """
    Build (and optionally write) a planted-motif dataset.

    Subjects are numbered 1..subject_count and cycle across each class's
    instances, so the default odd/even split halves every class. Classes are
    1-based. The same spec always yields the same data.
    """
    rng = np.random.default_rng(spec.seed)
    hip_index, edges = synthetic_topology(spec.joint_count)
    order = traversal_order(edges, spec.joint_count, hip_index)
    directions, lengths = _rest_pose(edges, rng)
    motifs_by_class = _class_motifs(spec.class_count, directions)
    subject_scale = rng.uniform(*LIMB_SCALE, size=spec.subject_count)

    sequences: List[SkeletonSequence] = []
    motifs: Dict[str, Tuple[int, int]] = {}
    for c in range(spec.class_count):
        trials: Dict[int, int] = {}
        for n in range(spec.instances_per_class):
            subject = n % spec.subject_count + 1
            trials[subject] = trials.get(subject, 0) + 1
            instance_id = f"a{c + 1:02d}_s{subject:02d}_e{trials[subject]:02d}"

            frame_count = int(rng.integers(spec.min_frames, spec.max_frames + 1))
            start = int(rng.integers(0, frame_count - spec.motif_length + 1))
            positions = _pose_instance(frame_count, hip_index, edges, order, directions,
                                       lengths * subject_scale[subject - 1], motifs_by_class[c],
                                       start, spec.motif_length, rng)
            if spec.noise > 0:
                positions = positions + rng.normal(0.0, spec.noise, size=positions.shape)

            sequences.append(SkeletonSequence(positions, c + 1, subject, trials[subject], hip_index, edges,
                                              instance_id))
            motifs[instance_id] = (start, spec.motif_length)

    dataset = SyntheticDataset(sequences, motifs)
    if output_dir is not None:
        write_synthetic(dataset, output_dir)
    logger.info(f"Generated {len(sequences)} synthetic instances ({spec.class_count} classes, seed {spec.seed})")
    return dataset


def write_synthetic(dataset: SyntheticDataset, output_dir: Union[str, Path]) -> Path:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    for seq in dataset.sequences:
        save_instance(seq, output_dir / f"{seq.instance_id}{CANONICAL_SUFFIX}")
    (output_dir / MOTIF_MANIFEST).write_text(dataset.manifest_text(), encoding="utf-8")
    logger.info(f"📁 Synthetic dataset written to {output_dir}")
    return output_dir


def read_motifs(path: Union[str, Path]) -> Dict[str, Tuple[int, int]]:
    """Parse a motif manifest; `path` may be the dataset directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MOTIF_MANIFEST
    motifs = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            instance_id, start, duration = line.split()
            motifs[instance_id] = (int(start), int(duration))
    return motifs


def motif_hit_rate(
    top_frames: Mapping[str, int],
    motifs: Mapping[str, Tuple[int, int]],
    length: int,
) -> float:
    """
    Fraction of instances whose top detector sits on the planted motif.

    A detector starting at frame t0 covers t0..t0+L-1; it hits when its
    center frame t0 + L//2 lies inside [start, start + duration).
    """
    checked = hits = 0
    for instance_id, frame in top_frames.items():
        if instance_id not in motifs:
            continue
        start, duration = motifs[instance_id]
        checked += 1
        hits += start <= frame + length // 2 < start + duration
    return hits / checked if checked else 0.0
