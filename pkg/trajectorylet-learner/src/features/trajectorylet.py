"""Trajectorylet descriptors and their PCA reduction

A trajectorylet of length L starting at frame t0 stacks, for every joint:

    x0  static positions        j(t0), ..., j(t0+L-1)
    x1  displacement            j(t0+i) - j(t0),              i = 1..L-1
    x2  second difference       x1[i] - x1[i-1],              i = 2..L-1
    x3  third difference        x2[i] - x2[i-1],              i = 3..L-1

Blocks are frame-major (all 3J coordinates of one offset, then the next)
and concatenated in the order x0, x1, x2, x3 restricted to the selected
components. Every window t0 = 0..F-L is extracted.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg

from src.features.skeleton_io import LimbReference, SkeletonSequence, hip_centered_frames, normalize_skeleton_size
from src.utils.error_handler import ConfigurationError, DimensionMismatchError, EmptySequenceError

logger = logging.getLogger(__name__)

COMPONENT_ORDER = ("x0", "x1", "x2", "x3")
# Offsets per block: x0 has L, x1 has L-1, x2 has L-2, x3 has L-3
_BLOCK_SHRINK = {"x0": 0, "x1": 1, "x2": 2, "x3": 3}


@dataclass(frozen=True)
class TrajectoryletConfig:
    length: int = 5
    components: Tuple[str, ...] = ("x0", "x1", "x2")
    pca_retain_fraction: float = 0.5

    def __post_init__(self):
        components = tuple(c for c in COMPONENT_ORDER if c in set(self.components))
        unknown = set(self.components) - set(COMPONENT_ORDER)
        if unknown:
            raise ConfigurationError(f"unknown trajectorylet component(s): {sorted(unknown)}")
        if not components:
            raise ConfigurationError("components must be nonempty")
        if self.length < 2:
            raise ConfigurationError(f"trajectorylet length must be >= 2, got {self.length}")
        for name in components:
            if self.length < _BLOCK_SHRINK[name] + 1:
                raise ConfigurationError(f"component {name} needs length >= {_BLOCK_SHRINK[name] + 1}")
        if not 0.0 < self.pca_retain_fraction <= 1.0:
            raise ConfigurationError("pca_retain_fraction must be in (0, 1]")
        object.__setattr__(self, "components", components)


@dataclass(frozen=True)
class Trajectorylet:
    values: np.ndarray = field(repr=False)
    source_instance: str
    start_frame: int
    class_label: int


@dataclass(frozen=True)
class InstanceTrajectorylets:
    """All trajectorylets of one action instance as rows in start-frame order."""
    instance_id: str
    class_label: int
    subject_id: int
    values: np.ndarray = field(repr=False)  # (F-L+1, dim)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def trajectorylets(self) -> List[Trajectorylet]:
        return [Trajectorylet(row, self.instance_id, t0, self.class_label) for t0, row in enumerate(self.values)]

    def reduced(self, model: "PcaModel") -> "InstanceTrajectorylets":
        return InstanceTrajectorylets(self.instance_id, self.class_label, self.subject_id, model.transform(self.values))


def instance_trajectorylets(seq: SkeletonSequence, config: TrajectoryletConfig) -> InstanceTrajectorylets:
    """Raw descriptors of a (size-normalized) sequence."""
    values = trajectorylet_matrix(hip_centered_frames(seq), config, seq.instance_id)
    return InstanceTrajectorylets(seq.instance_id, seq.class_label, seq.subject_id, values)


def extract_instances(
    sequences: Iterable[SkeletonSequence],
    config: TrajectoryletConfig,
    limb_reference: Optional[LimbReference] = None,
) -> List[InstanceTrajectorylets]:
    """Size-normalize (when a reference is given), hip-center and extract every sequence."""
    instances = []
    for seq in sequences:
        if limb_reference is not None:
            seq = normalize_skeleton_size(seq, limb_reference)
        instances.append(instance_trajectorylets(seq, config))
    return instances


def raw_dimension(length: int, joint_count: int, components: Iterable[str]) -> int:
    """Sum of block sizes: x0 -> L*3J, x1 -> (L-1)*3J, x2 -> (L-2)*3J, x3 -> (L-3)*3J."""
    return sum((length - _BLOCK_SHRINK[c]) * 3 * joint_count for c in set(components))


def trajectorylet_matrix(frames: np.ndarray, config: TrajectoryletConfig, instance_id: str = "") -> np.ndarray:
    """
    Descriptors of every window as rows of an (F-L+1, raw_dim) matrix.

    Args:
        frames: (F, 3J) hip-centered frame vectors
        config: trajectorylet settings
        instance_id: used in error messages only
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2:
        raise DimensionMismatchError(f"frames must be (F, 3J), got shape {frames.shape}")
    length = config.length
    if frames.shape[0] < length:
        raise EmptySequenceError(
            f"instance {instance_id!r} has {frames.shape[0]} frames, fewer than trajectorylet length {length}")

    # (n, 3J, L) -> (n, L, 3J)
    windows = sliding_window_view(frames, length, axis=0).transpose(0, 2, 1)
    count = windows.shape[0]

    blocks = {"x0": windows}
    delta = windows[:, 1:, :] - windows[:, :1, :]
    blocks["x1"] = delta
    if "x2" in config.components or "x3" in config.components:
        blocks["x2"] = np.diff(delta, axis=1)
    if "x3" in config.components:
        blocks["x3"] = np.diff(blocks["x2"], axis=1)

    return np.concatenate([blocks[c].reshape(count, -1) for c in config.components], axis=1)


def extract_trajectorylets(
    seq: Union[SkeletonSequence, np.ndarray],
    config: TrajectoryletConfig,
    instance_id: Optional[str] = None,
    class_label: Optional[int] = None,
) -> List[Trajectorylet]:
    """
    Extract one raw trajectorylet per start frame t0 in 0..F-L.

    `seq` is a SkeletonSequence (hip-centered here) or an already
    hip-centered (F, 3J) array.
    """
    if isinstance(seq, SkeletonSequence):
        frames = hip_centered_frames(seq)
        instance_id = seq.instance_id if instance_id is None else instance_id
        class_label = seq.class_label if class_label is None else class_label
    else:
        frames = np.asarray(seq, dtype=float)
    instance_id = instance_id or ""
    class_label = 0 if class_label is None else int(class_label)

    matrix = trajectorylet_matrix(frames, config, instance_id)
    return [Trajectorylet(row, instance_id, t0, class_label) for t0, row in enumerate(matrix)]


def stack_values(descriptors: Sequence[Union[Trajectorylet, np.ndarray]]) -> np.ndarray:
    """Rows of a descriptor list as a 2-D array, checking that dimensions agree."""
    rows = [d.values if isinstance(d, Trajectorylet) else np.asarray(d, dtype=float) for d in descriptors]
    if not rows:
        return np.zeros((0, 0))
    dims = {row.shape for row in rows}
    if len(dims) != 1:
        raise DimensionMismatchError(f"descriptors have differing shapes: {sorted(dims)}")
    return np.vstack(rows)


@dataclass(frozen=True)
class PcaModel:
    """Mean and orthonormal principal directions (rows of basis)."""
    mean: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[1] != mean.shape[0]:
            raise DimensionMismatchError(f"basis has {basis.shape[1]} columns, mean has {mean.shape[0]}")
        mean.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)

    @property
    def retained_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def raw_dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        """Project rows of an (n, raw_dim) matrix."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape[-1] != self.raw_dim:
            raise DimensionMismatchError(f"descriptor dim {matrix.shape[-1]} != PCA raw dim {self.raw_dim}")
        return (matrix - self.mean) @ self.basis.T

    def inverse_transform(self, reduced: np.ndarray) -> np.ndarray:
        return np.asarray(reduced, dtype=float) @ self.basis + self.mean

    def to_text(self) -> str:
        lines = [f"{self.retained_dim} {self.raw_dim}", " ".join(repr(v) for v in self.mean.tolist())]
        lines.extend(" ".join(repr(v) for v in row) for row in self.basis.tolist())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PcaModel":
        lines = [line for line in text.splitlines() if line.strip()]
        retained, raw = (int(v) for v in lines[0].split())
        mean = np.array([float(v) for v in lines[1].split()])
        basis = np.array([[float(v) for v in line.split()] for line in lines[2:2 + retained]])
        if mean.shape != (raw,) or basis.shape != (retained, raw):
            raise DimensionMismatchError(f"PCA text declares {retained}x{raw} but holds {basis.shape}")
        return cls(mean, basis)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_text(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PcaModel":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def retained_dimension(raw_dim: int, retain_fraction: float) -> int:
    # rounding first keeps 2/3 * 3 at 2
    return max(1, math.ceil(round(retain_fraction * raw_dim, 9)))


def fit_pca(descriptors: Union[Sequence[Trajectorylet], np.ndarray], retain_fraction: float) -> PcaModel:
    """
    Fit PCA on training descriptors.

    Directions are ordered by descending eigenvalue of the sample covariance,
    ties by the index of their first nonzero axis; each is signed so its
    largest-magnitude entry is positive.
    """
    matrix = descriptors if isinstance(descriptors, np.ndarray) else stack_values(descriptors)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] < 2:
        raise EmptySequenceError(f"PCA needs at least 2 descriptors, got {matrix.shape[0]}")
    if not 0.0 < retain_fraction <= 1.0:
        raise ConfigurationError("retain_fraction must be in (0, 1]")

    raw_dim = matrix.shape[1]
    retained = retained_dimension(raw_dim, retain_fraction)
    mean = matrix.mean(axis=0)
    covariance = np.cov(matrix, rowvar=False, ddof=1).reshape(raw_dim, raw_dim)

    eigenvalues, eigenvectors = linalg.eigh(covariance)
    vectors = eigenvectors.T
    magnitudes = np.abs(vectors)
    first_axis = np.argmax(magnitudes > 1e-12, axis=1)
    # lexsort: last key is primary
    order = np.lexsort((first_axis, -eigenvalues))[:retained]

    basis = vectors[order].copy()
    peaks = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(retained), peaks])
    signs[signs == 0] = 1.0
    basis *= signs[:, None]

    logger.info(f"PCA: {matrix.shape[0]} descriptors, raw dim {raw_dim} -> {retained}")
    return PcaModel(mean, basis, eigenvalues[order])


def apply_pca(model: PcaModel, descriptor: Union[Trajectorylet, np.ndarray]) -> Union[Trajectorylet, np.ndarray]:
    """Reduce one descriptor; metadata is carried over for Trajectorylet input."""
    if isinstance(descriptor, Trajectorylet):
        values = model.transform(descriptor.values)
        return Trajectorylet(values, descriptor.source_instance, descriptor.start_frame, descriptor.class_label)
    return model.transform(descriptor)
