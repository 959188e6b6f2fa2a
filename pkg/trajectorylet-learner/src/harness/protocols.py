"""Evaluation protocols: cross-subject splits and action subsets"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from src.config.datasets import get_action_subsets
from src.config.pipeline_config import PipelineConfig
from src.features.skeleton_io import SkeletonSequence
from src.harness.reports import ProtocolOutcome
from src.utils.error_handler import ProtocolError

logger = logging.getLogger(__name__)

PROTOCOL_KINDS = ("cross_subject_all", "as_subsets", "custom_split")


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str = "cross_subject_all"
    subsets: Dict[str, List[int]] = field(default_factory=dict)
    train_subjects: Tuple[int, ...] = ()
    test_subjects: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ProtocolError(f"unknown protocol {self.kind!r}; expected one of {PROTOCOL_KINDS}")
        overlap = set(self.train_subjects) & set(self.test_subjects)
        if overlap:
            raise ProtocolError(f"subjects {sorted(overlap)} are in both train and test")
        if self.kind == "as_subsets" and not self.subsets:
            raise ProtocolError("as_subsets needs action subset class lists")
        if self.kind == "custom_split" and not (self.train_subjects and self.test_subjects):
            raise ProtocolError("custom_split needs nonempty train and test subject lists")

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "ProtocolSpec":
        subsets = get_action_subsets(config.dataset) if config.protocol == "as_subsets" else {}
        return cls(config.protocol, subsets, tuple(config.train_subjects), tuple(config.test_subjects))


def split_dataset(
    sequences: Sequence[SkeletonSequence],
    protocol: ProtocolSpec,
    classes: Optional[Sequence[int]] = None,
) -> Tuple[List[SkeletonSequence], List[SkeletonSequence]]:
    """
    Train/test partition by subject.

    Without explicit subject lists, odd-numbered subjects train and
    even-numbered subjects test.
    """
    if classes:
        wanted = set(classes)
        sequences = [s for s in sequences if s.class_label in wanted]

    if protocol.train_subjects or protocol.test_subjects:
        train_set, test_set = set(protocol.train_subjects), set(protocol.test_subjects)
        train = [s for s in sequences if s.subject_id in train_set]
        test = [s for s in sequences if s.subject_id in test_set]
    else:
        train = [s for s in sequences if s.subject_id % 2 == 1]
        test = [s for s in sequences if s.subject_id % 2 == 0]

    if not train:
        raise ProtocolError("protocol leaves the training split empty")
    if not test:
        raise ProtocolError("protocol leaves the test split empty")
    logger.info(f"Split: {len(train)} train / {len(test)} test instances")
    return train, test


def protocol_splits(
    sequences: Sequence[SkeletonSequence],
    protocol: ProtocolSpec,
    classes: Optional[Sequence[int]] = None,
) -> Dict[str, Tuple[List[SkeletonSequence], List[SkeletonSequence]]]:
    """Named splits: one for subject protocols, one per action subset for as_subsets."""
    present = {s.class_label for s in sequences}
    if protocol.kind != "as_subsets":
        if classes:
            missing = sorted(set(classes) - present)
            if missing:
                raise ProtocolError(f"classes {missing} are not present in the dataset")
        return {protocol.kind: split_dataset(sequences, protocol, classes)}

    splits = {}
    for name, subset in sorted(protocol.subsets.items()):
        missing = sorted(set(subset) - present)
        if missing:
            raise ProtocolError(f"{name} references classes {missing} absent from the dataset")
        splits[name] = split_dataset(sequences, protocol, subset)
    return splits


async def evaluate_protocol(
    dataset: Sequence[SkeletonSequence],
    protocol: ProtocolSpec,
    config: PipelineConfig,
    run_name: str = "evaluate",
    save_bundles: bool = True,
) -> ProtocolOutcome:
    """Run the pipeline on every split of the protocol and collect the reports."""
    from src.workflow import run_pipeline

    reports, bundle_dirs = {}, {}
    for name, (train, test) in protocol_splits(dataset, protocol, config.classes or None).items():
        logger.info(f"Protocol {protocol.kind}: running split {name}")
        result = await run_pipeline(config, train_sequences=train, test_sequences=test,
                                    run_name=f"{run_name}_{name}", save_bundle=save_bundles)
        reports[name] = result["report"]
        bundle_dirs[name] = result.get("bundle_dir")

    outcome = ProtocolOutcome(protocol.kind, reports, bundle_dirs)
    logger.info(f"Protocol {protocol.kind}: mean accuracy {outcome.mean_accuracy:.4f}")
    return outcome
