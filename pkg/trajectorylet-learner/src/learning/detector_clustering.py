"""Template detector selection

The candidate union is deduplicated by clustering detectors on the cosine
similarity of their active scores (pool scores clipped at zero). Detectors
that never fire positively on the pool are dropped first. Each cluster
contributes the member with the largest single active score.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from src.learning.linear_svm import Detector, detectors_from_text, detectors_to_text, score_matrix
from src.utils.error_handler import DimensionMismatchError, EmptySequenceError, get_error_accumulator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActiveScoreVector:
    scores: np.ndarray = field(repr=False)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.scores > 0)


@dataclass(frozen=True)
class TemplateDetectorSet:
    """
    Representatives, one per cluster, in cluster order.

    `assignments[i]` is the cluster of candidate `candidate_index[i]`;
    candidates dropped for a zero active-score vector are not listed.
    """
    detectors: Tuple[Detector, ...]
    candidate_index: np.ndarray = field(repr=False)
    assignments: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.detectors)

    @property
    def weights(self) -> np.ndarray:
        return np.vstack([d.weight for d in self.detectors])

    @property
    def biases(self) -> np.ndarray:
        return np.array([d.bias for d in self.detectors])

    def scores(self, points: np.ndarray) -> np.ndarray:
        """(n, K) detection scores."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.weights.shape[1]:
            raise DimensionMismatchError(f"template dim {self.weights.shape[1]} != input dim {points.shape[1]}")
        return points @ self.weights.T + self.biases

    def assignments_text(self) -> str:
        return "".join(f"{d} {c}\n" for d, c in zip(self.candidate_index.tolist(), self.assignments.tolist()))

    def to_text(self) -> str:
        return detectors_to_text(self.detectors)

    @classmethod
    def from_text(cls, detectors_text: str, assignments_text: str = "") -> "TemplateDetectorSet":
        rows = [line.split() for line in assignments_text.splitlines() if line.strip()]
        index = np.array([int(r[0]) for r in rows], dtype=int)
        clusters = np.array([int(r[1]) for r in rows], dtype=int)
        return cls(tuple(detectors_from_text(detectors_text)), index, clusters)


def active_score_vector(det: Detector, pool_values: np.ndarray) -> ActiveScoreVector:
    pool_values = np.atleast_2d(np.asarray(pool_values, dtype=float))
    if pool_values.shape[0] == 0:
        raise EmptySequenceError("active scores need a nonempty pool")
    return ActiveScoreVector(np.maximum(0.0, pool_values @ det.weight + det.bias))


def active_score_matrix(detectors: Sequence[Detector], pool_values: np.ndarray) -> np.ndarray:
    """(D, N) active scores, one row per detector."""
    return np.maximum(0.0, score_matrix(detectors, pool_values).T)


def affinity(r: ActiveScoreVector, r_other: ActiveScoreVector) -> float:
    """Cosine similarity of two active-score vectors; 0 if either is zero."""
    a, b = np.asarray(r.scores, dtype=float), np.asarray(r_other.scores, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"active score vectors differ in length: {a.shape} vs {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        return 0.0
    return float(np.clip(a @ b / norm, 0.0, 1.0))


def affinity_matrix(active: np.ndarray) -> np.ndarray:
    """Symmetric cosine affinity of the rows of `active`, entries in [0, 1]."""
    active = np.atleast_2d(np.asarray(active, dtype=float))
    norms = np.linalg.norm(active, axis=1)
    nonzero = norms > 0
    unit = np.zeros_like(active)
    unit[nonzero] = active[nonzero] / norms[nonzero, None]
    q = np.clip(unit @ unit.T, 0.0, 1.0)
    q = 0.5 * (q + q.T)
    np.fill_diagonal(q, np.where(nonzero, 1.0, 0.0))
    return q


def farthest_point_seeds(embedding: np.ndarray, k: int, seed: int) -> np.ndarray:
    """
    Indices of k initial centers.

    The first is drawn from `seed`; each further one is the point farthest
    from those already chosen (lowest index on ties).
    """
    n = embedding.shape[0]
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    nearest = cdist(embedding, embedding[chosen]).min(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, cdist(embedding, embedding[[nxt]])[:, 0])
    return np.array(chosen)


def _seeded_kmeans(embedding: np.ndarray, k: int, seed: int) -> np.ndarray:
    centers = embedding[farthest_point_seeds(embedding, k, seed)]
    model = KMeans(n_clusters=k, init=centers, n_init=1, random_state=seed)
    return model.fit_predict(embedding).astype(int)


def spectral_cluster(q: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """
    Normalized spectral clustering of an affinity matrix into k clusters.

    Embeds with the k leading eigenvectors of D^-1/2 Q D^-1/2, row-normalizes
    and runs seeded k-means. Returns one cluster index per row of Q.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if q.ndim != 2 or q.shape[1] != n:
        raise DimensionMismatchError(f"affinity matrix must be square, got {q.shape}")
    if not np.allclose(q, q.T, atol=1e-10, rtol=0.0):
        raise ValueError("affinity matrix is not symmetric")
    if not 1 <= k <= n:
        raise ValueError(f"K={k} must be between 1 and the number of detectors ({n})")

    if k == 1:
        return np.zeros(n, dtype=int)
    if k == n:
        return np.arange(n)

    degree = q.sum(axis=1)
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.where(degree > 0, degree, 1.0)), 0.0)
    normalized = inv_sqrt[:, None] * q * inv_sqrt[None, :]
    normalized = 0.5 * (normalized + normalized.T)

    _, vectors = linalg.eigh(normalized, subset_by_index=[n - k, n - 1])
    embedding = vectors[:, ::-1]
    lengths = np.linalg.norm(embedding, axis=1)
    embedding = embedding / np.where(lengths > 0, lengths, 1.0)[:, None]

    return _seeded_kmeans(embedding, k, seed)


def select_representatives(
    assignments: np.ndarray,
    detectors: Sequence[Detector],
    active: np.ndarray,
    candidate_index: Optional[np.ndarray] = None,
) -> TemplateDetectorSet:
    """
    Pick one detector per nonempty cluster.

    Key: largest maximum active score, then largest mean active score, then
    provenance (instance id, frame). Clusters are renumbered densely in
    ascending order of their original index.
    """
    assignments = np.asarray(assignments, dtype=int)
    if assignments.shape[0] != len(detectors) or active.shape[0] != len(detectors):
        raise DimensionMismatchError("assignments, detectors and active scores must align")
    candidate_index = np.arange(len(detectors)) if candidate_index is None else np.asarray(candidate_index)

    peak = active.max(axis=1) if active.size else np.zeros(len(detectors))
    mean = active.mean(axis=1) if active.size else np.zeros(len(detectors))

    clusters = sorted(set(assignments.tolist()))
    expected = int(assignments.max()) + 1 if assignments.size else 0
    if len(clusters) < expected:
        get_error_accumulator().add_error(
            "clustering", f"{expected - len(clusters)} empty cluster(s) skipped; K reduced to {len(clusters)}")

    representatives = []
    dense = np.empty_like(assignments)
    for new_id, cluster in enumerate(clusters):
        members = np.flatnonzero(assignments == cluster)
        dense[members] = new_id
        best = min(members, key=lambda m: (-peak[m], -mean[m], detectors[m].source_instance, detectors[m].source_frame))
        representatives.append(detectors[best])

    return TemplateDetectorSet(tuple(representatives), candidate_index, dense)


def build_template_set(
    detectors: Sequence[Detector],
    pool_values: np.ndarray,
    k: int,
    seed: int = 0,
) -> TemplateDetectorSet:
    """Active scores, drop never-firing detectors, cluster into K, pick representatives."""
    if not detectors:
        raise EmptySequenceError("no candidate detectors to cluster")

    active = active_score_matrix(detectors, pool_values)
    keep = np.flatnonzero(np.any(active > 0, axis=1))
    dropped = len(detectors) - keep.size
    if dropped:
        logger.info(f"Dropped {dropped} detector(s) with zero active scores")
    if keep.size == 0:
        raise EmptySequenceError("every candidate detector has a zero active-score vector")

    if k > keep.size:
        get_error_accumulator().add_error(
            "clustering", f"K={k} exceeds {keep.size} surviving detectors; clamped to {keep.size}")
        k = keep.size

    survivors = [detectors[i] for i in keep]
    q = affinity_matrix(active[keep])
    assignments = spectral_cluster(q, k, seed)
    template = select_representatives(assignments, survivors, active[keep], candidate_index=keep)
    logger.info(f"Template set: {template.size} detectors from {len(detectors)} candidates")
    return template
