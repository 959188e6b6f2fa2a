"""Action encodings: max-pooled template detector scores

The flat encoding takes, per template detector, the maximum score over an
instance's trajectorylets. A temporal pyramid repeats this on the whole
start-index range, its two halves, its four quarters and so on; blocks are
concatenated level by level (K * (2^levels - 1) values). Segments split
left-heavy: a segment of n indices gives ceil(n/2) to its first half. An
empty segment takes the whole-range values.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.features.trajectorylet import InstanceTrajectorylets, Trajectorylet, stack_values
from src.learning.detector_clustering import TemplateDetectorSet
from src.utils.error_handler import ConfigurationError, EmptySequenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActionEncoding:
    values: np.ndarray = field(repr=False)
    levels: int = 1
    instance_id: str = ""
    label: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def encoding_dimension(k: int, levels: int) -> int:
    return k * (2 ** levels - 1)


def pyramid_segments(count: int, levels: int) -> List[Tuple[int, int]]:
    """Half-open [start, end) segments, level 1 first, left to right within a level."""
    if levels < 1:
        raise ConfigurationError(f"pyramid levels must be >= 1, got {levels}")
    segments = [(0, count)]
    current = [(0, count)]
    for _ in range(levels - 1):
        split = []
        for start, end in current:
            middle = start + -(-(end - start) // 2)
            split.extend([(start, middle), (middle, end)])
        segments.extend(split)
        current = split
    return segments


def _score_rows(template: TemplateDetectorSet, trajectorylets) -> np.ndarray:
    if isinstance(trajectorylets, InstanceTrajectorylets):
        matrix = trajectorylets.values
    elif isinstance(trajectorylets, np.ndarray):
        matrix = np.atleast_2d(trajectorylets)
    else:
        matrix = stack_values(list(trajectorylets))
    if matrix.shape[0] == 0 or matrix.size == 0:
        raise EmptySequenceError("cannot encode an instance without trajectorylets")
    return template.scores(matrix)


def _metadata(trajectorylets) -> Tuple[str, Optional[int]]:
    if isinstance(trajectorylets, InstanceTrajectorylets):
        return trajectorylets.instance_id, trajectorylets.class_label
    if not isinstance(trajectorylets, np.ndarray):
        items = list(trajectorylets)
        if items and isinstance(items[0], Trajectorylet):
            return items[0].source_instance, items[0].class_label
    return "", None


def encode(template: TemplateDetectorSet, trajectorylets) -> ActionEncoding:
    """Flat encoding: per-detector maximum score over the instance."""
    instance_id, label = _metadata(trajectorylets)
    scores = _score_rows(template, trajectorylets)
    return ActionEncoding(scores.max(axis=0), 1, instance_id, label)


def encode_pyramid(template: TemplateDetectorSet, trajectorylets, levels: int) -> ActionEncoding:
    """Temporal-pyramid encoding over trajectorylet start indices."""
    instance_id, label = _metadata(trajectorylets)
    scores = _score_rows(template, trajectorylets)
    whole = scores.max(axis=0)
    blocks = []
    for start, end in pyramid_segments(scores.shape[0], levels):
        blocks.append(scores[start:end].max(axis=0) if end > start else whole)
    return ActionEncoding(np.concatenate(blocks), levels, instance_id, label)


def encode_batch(
    template: TemplateDetectorSet,
    instances: Sequence[InstanceTrajectorylets],
    levels: int = 1,
) -> List[ActionEncoding]:
    """Encode instances in the given order."""
    if levels == 1:
        return [encode(template, inst) for inst in instances]
    return [encode_pyramid(template, inst, levels) for inst in instances]


def encoding_matrix(encodings: Sequence[ActionEncoding]) -> np.ndarray:
    return np.vstack([e.values for e in encodings])


def encodings_to_text(encodings: Iterable[ActionEncoding]) -> str:
    """One instance per line: `label v_1 ... v_dim` (label -1 when unknown)."""
    lines = []
    for e in encodings:
        label = -1 if e.label is None else e.label
        lines.append(" ".join([str(label)] + [repr(v) for v in e.values.tolist()]))
    return "\n".join(lines) + ("\n" if lines else "")


def write_encodings(encodings: Iterable[ActionEncoding], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(encodings_to_text(encodings), encoding="utf-8")
    return path


def read_encodings(path: Union[str, Path], levels: int = 1) -> List[ActionEncoding]:
    encodings = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split()
        label = int(parts[0])
        encodings.append(ActionEncoding(np.array([float(v) for v in parts[1:]]), levels,
                                        label=None if label < 0 else label))
    return encodings
