"""Discriminative detector mining

For every trajectorylet of a training instance an exemplar-SVM is trained
against all pool members of other classes, unit-normalized and scored on the
pool. Its purity is the share of the instance's class among the N_A
best-scoring pool members (members from the same instance are not counted).
Each instance keeps its M_A purest detectors.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.features.trajectorylet import InstanceTrajectorylets, Trajectorylet, stack_values
from src.learning.linear_svm import (
    Detector,
    EsvmParams,
    gram_matrix,
    train_esvm,
    unit_normalize,
)
from src.utils.error_handler import ConfigurationError, EmptySequenceError, get_error_accumulator, safe_execute

logger = logging.getLogger(__name__)


# ============================================================================
# Types
# ============================================================================

@dataclass(frozen=True)
class MiningParams:
    n_top: int = 50
    per_instance_budget: int = 10

    def __post_init__(self):
        if self.n_top < 1 or self.per_instance_budget < 1:
            raise ConfigurationError("n_top and per_instance_budget must be >= 1")


@dataclass
class TrajectoryletPool:
    """A labelled sample of reduced trajectorylets shared by all candidates."""
    values: np.ndarray = field(repr=False)          # (N, d)
    class_labels: np.ndarray = field(repr=False)    # (N,)
    instance_ids: np.ndarray = field(repr=False)    # (N,) str
    start_frames: np.ndarray = field(repr=False)    # (N,)
    sample_seed: int = 0
    _gram: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.class_labels = np.asarray(self.class_labels, dtype=int)
        self.instance_ids = np.asarray(self.instance_ids, dtype=str)
        self.start_frames = np.asarray(self.start_frames, dtype=int)
        n = self.values.shape[0]
        if not (self.class_labels.shape == self.instance_ids.shape == self.start_frames.shape == (n,)):
            raise ValueError("pool metadata arrays must match the number of descriptors")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def classes(self) -> Tuple[int, ...]:
        return tuple(np.unique(self.class_labels).tolist())

    @property
    def descriptors(self) -> List[Trajectorylet]:
        return [Trajectorylet(v, i, int(f), int(c)) for v, i, f, c in
                zip(self.values, self.instance_ids, self.start_frames, self.class_labels)]

    def gram(self, limit: int) -> Optional[np.ndarray]:
        """Pool Gram matrix, computed once; None when the pool exceeds `limit`."""
        if self.size > limit:
            return None
        if self._gram is None:
            self._gram = gram_matrix(self.values)
        return self._gram

    @classmethod
    def from_trajectorylets(cls, descriptors: Sequence[Trajectorylet], sample_seed: int = 0) -> "TrajectoryletPool":
        return cls(
            values=stack_values(descriptors),
            class_labels=[d.class_label for d in descriptors],
            instance_ids=[d.source_instance for d in descriptors],
            start_frames=[d.start_frame for d in descriptors],
            sample_seed=sample_seed,
        )

    @classmethod
    def from_instances(cls, instances: Iterable[InstanceTrajectorylets], sample_seed: int = 0) -> "TrajectoryletPool":
        instances = list(instances)
        if not instances:
            raise EmptySequenceError("no training instances to build a pool from")
        return cls(
            values=np.vstack([inst.values for inst in instances]),
            class_labels=np.concatenate([np.full(inst.count, inst.class_label) for inst in instances]),
            instance_ids=np.concatenate([np.full(inst.count, inst.instance_id, dtype=object) for inst in instances]),
            start_frames=np.concatenate([np.arange(inst.count) for inst in instances]),
            sample_seed=sample_seed,
        )


@dataclass(frozen=True)
class ClassHistogram:
    classes: Tuple[int, ...]
    counts: np.ndarray
    n_top: int

    def count(self, class_label: int) -> int:
        if class_label not in self.classes:
            return 0
        return int(self.counts[self.classes.index(class_label)])


@dataclass(frozen=True)
class MinedDetector:
    """A kept detector with its mining statistics."""
    detector: Detector
    purity: float
    mean_top_score: float
    histogram: ClassHistogram

    @property
    def source_instance(self) -> str:
        return self.detector.source_instance

    @property
    def source_frame(self) -> int:
        return self.detector.source_frame


# ============================================================================
# Operations
# ============================================================================

def sample_pool(
    dataset: Union[TrajectoryletPool, Sequence[Trajectorylet], Sequence[InstanceTrajectorylets]],
    size: int,
    seed: int,
) -> TrajectoryletPool:
    """Seeded uniform sample without replacement of min(size, total) descriptors, kept in dataset order."""
    if not isinstance(dataset, TrajectoryletPool):
        items = list(dataset)
        if not items:
            raise EmptySequenceError("cannot sample a pool from an empty dataset")
        if isinstance(items[0], InstanceTrajectorylets):
            dataset = TrajectoryletPool.from_instances(items, seed)
        else:
            dataset = TrajectoryletPool.from_trajectorylets(items, seed)

    total = dataset.size
    if total == 0:
        raise EmptySequenceError("cannot sample a pool from an empty dataset")
    if size >= total:
        chosen = np.arange(total)
    else:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(total, size=size, replace=False))

    logger.info(f"Sampled pool of {chosen.size} / {total} trajectorylets (seed {seed})")
    return TrajectoryletPool(
        values=dataset.values[chosen],
        class_labels=dataset.class_labels[chosen],
        instance_ids=dataset.instance_ids[chosen],
        start_frames=dataset.start_frames[chosen],
        sample_seed=seed,
    )


def top_indices(scores: np.ndarray, n: int) -> np.ndarray:
    """
    Indices of the n largest scores, best first; equal scores go to the lower index.

    Runs in linear time plus a sort of the n selected entries.
    """
    scores = np.asarray(scores, dtype=float)
    if n >= scores.size:
        return np.lexsort((np.arange(scores.size), -scores))
    threshold = np.partition(scores, scores.size - n)[scores.size - n]
    above = np.flatnonzero(scores > threshold)
    at = np.flatnonzero(scores == threshold)[: n - above.size]
    chosen = np.concatenate([above, at])
    return chosen[np.lexsort((chosen, -scores[chosen]))]


def _top_scores(det: Detector, pool: TrajectoryletPool, n_top: int,
                exclude_instance: Optional[str]) -> Tuple[np.ndarray, np.ndarray]:
    if not det.normalized:
        raise ValueError("class histograms need a unit-normalized detector")
    scores = pool.values @ det.weight + det.bias
    eligible = np.arange(pool.size)
    if exclude_instance is not None:
        eligible = np.flatnonzero(pool.instance_ids != exclude_instance)
    if eligible.size < n_top:
        raise EmptySequenceError(f"pool has {eligible.size} eligible descriptors, fewer than N_A={n_top}")
    picked = eligible[top_indices(scores[eligible], n_top)]
    return picked, scores[picked]


def class_histogram(
    det: Detector,
    pool: TrajectoryletPool,
    n_top: int,
    exclude_instance: Optional[str] = None,
    classes: Optional[Sequence[int]] = None,
) -> ClassHistogram:
    """
    Class counts among the n_top best-scoring pool members.

    One bin per entry of `classes` (the dataset classes; the pool's own
    classes when omitted), so histograms of different detectors line up.
    """
    picked, _ = _top_scores(det, pool, n_top, exclude_instance)
    return _histogram(pool, picked, n_top, classes)


def _histogram(pool: TrajectoryletPool, picked: np.ndarray, n_top: int,
               classes: Optional[Sequence[int]] = None) -> ClassHistogram:
    bins = pool.classes if classes is None else tuple(sorted(int(c) for c in classes))
    missing = set(pool.classes) - set(bins)
    if missing:
        raise ValueError(f"pool holds classes {sorted(missing)} outside the histogram classes {list(bins)}")
    counts = np.array([np.count_nonzero(pool.class_labels[picked] == c) for c in bins], dtype=int)
    return ClassHistogram(bins, counts, n_top)


def purity(hist: ClassHistogram, class_label: int) -> float:
    return hist.count(class_label) / hist.n_top


def _mine_candidate(exemplar: np.ndarray, negatives: np.ndarray, pool: TrajectoryletPool, params: EsvmParams,
                    n_top: int, gram, negative_index, class_label: int, instance_id: str, start_frame: int,
                    classes: Optional[Sequence[int]]) -> MinedDetector:
    det = train_esvm(exemplar, negatives, params, gram=gram, negative_index=negative_index,
                     source_class=class_label, source_instance=instance_id, source_frame=start_frame)
    det = unit_normalize(det)
    picked, top = _top_scores(det, pool, n_top, exclude_instance=instance_id)
    hist = _histogram(pool, picked, n_top, classes)
    return MinedDetector(det, purity(hist, class_label), float(np.mean(top)), hist)


def mine_instance_detectors(
    instance: InstanceTrajectorylets,
    pool: TrajectoryletPool,
    esvm_params: EsvmParams,
    mining_params: MiningParams,
    gram_cache_limit: int = 4000,
    classes: Optional[Sequence[int]] = None,
) -> List[MinedDetector]:
    """
    Up to M_A detectors of one instance, purest first.

    Ordering: purity descending, then mean top-N_A score descending, then
    start frame ascending. A candidate whose training or scoring fails is
    skipped and recorded as a warning; an instance whose every candidate
    fails yields an empty list.
    """
    if instance.count == 0:
        raise EmptySequenceError(f"instance {instance.instance_id!r} has no trajectorylets")

    class_label = instance.class_label
    negative_index = np.flatnonzero(pool.class_labels != class_label)
    if negative_index.size == 0:
        raise EmptySequenceError(f"pool has no negatives for class {class_label}")
    negatives = pool.values[negative_index]
    gram = pool.gram(gram_cache_limit)
    accumulator = get_error_accumulator()

    candidates: List[MinedDetector] = []
    for start_frame, exemplar in enumerate(instance.values):
        context = f"{instance.instance_id} t0={start_frame}"
        mined = safe_execute(_mine_candidate, exemplar, negatives, pool, esvm_params, mining_params.n_top,
                             gram,
                             negative_index if gram is not None else None,
                             class_label, instance.instance_id, start_frame, classes,
                             context=f"ESVM {context}", node="mining")
        if mined is None:
            continue
        if not mined.detector.converged:
            accumulator.add_error("mining", f"ESVM {context} did not converge; kept best iterate")
        candidates.append(mined)
        logger.debug(f"{context}: purity {candidates[-1].purity:.3f}")

    candidates.sort(key=lambda m: (-m.purity, -m.mean_top_score, m.source_frame))
    kept = candidates[: mining_params.per_instance_budget]
    logger.debug(f"{instance.instance_id}: kept {len(kept)} of {len(candidates)} candidates")
    return kept


def mine_detectors(
    instances: Sequence[InstanceTrajectorylets],
    pool: TrajectoryletPool,
    esvm_params: EsvmParams,
    mining_params: MiningParams,
    gram_cache_limit: int = 4000,
) -> Dict[str, List[MinedDetector]]:
    """Mine every training instance sequentially; keys sorted by instance id."""
    classes = sorted({inst.class_label for inst in instances} | set(pool.classes))
    mined = {inst.instance_id: mine_instance_detectors(inst, pool, esvm_params, mining_params, gram_cache_limit,
                                                       classes)
             for inst in instances}
    return dict(sorted(mined.items()))


def flatten_mined(mined: Dict[str, List[MinedDetector]]) -> List[MinedDetector]:
    """Candidate union in (instance id, rank) order."""
    return [m for instance_id in sorted(mined) for m in mined[instance_id]]


def format_mining_report(mined: Dict[str, List[MinedDetector]]) -> str:
    """One line per kept detector: `instance class frame P_t mean_top_score`."""
    lines = []
    for m in flatten_mined(mined):
        det = m.detector
        lines.append(f"{det.source_instance} {det.source_class} {det.source_frame} "
                     f"{m.purity!r} {m.mean_top_score!r}")
    return "\n".join(lines) + ("\n" if lines else "")
