"""State definitions for the trajectorylet learning workflow"""

from typing import Annotated, Any, Dict, List, Optional

from typing_extensions import TypedDict

from src.features.skeleton_io import LimbReference, SkeletonSequence
from src.features.trajectorylet import InstanceTrajectorylets, PcaModel
from src.harness.reports import EvaluationReport
from src.learning.detector_clustering import TemplateDetectorSet
from src.learning.detector_mining import MinedDetector, TrajectoryletPool
from src.learning.encoding import ActionEncoding
from src.learning.linear_svm import MulticlassModel


def merge_dicts(left: Dict, right: Dict) -> Dict:
    """Merge two dictionaries, with right taking precedence"""
    if not left:
        return right
    if not right:
        return left
    merged = {**left, **right}
    return merged


class PipelineState(TypedDict, total=False):
    """
    Main state for the learning workflow.

    All fields optional to support partial updates from nodes; fan-out
    results (mined detectors, stage timings) merge through reducers.
    """

    # Input
    run_name: str
    run_id: str
    config: Dict[str, Any]  # PipelineConfig.model_dump()
    save_bundle: bool
    bundle_dir: Optional[str]

    # Stage 1: data loading
    train_sequences: List[SkeletonSequence]
    test_sequences: List[SkeletonSequence]

    # Stage 2: preprocessing
    limb_reference: LimbReference
    pca_model: PcaModel
    train_instances: List[InstanceTrajectorylets]  # PCA-reduced
    test_instances: List[InstanceTrajectorylets]

    # Stage 3: mining (parallel by training instance)
    pool: TrajectoryletPool
    mining_started: float
    mined: Annotated[Dict[str, List[MinedDetector]], merge_dicts]  # instance id -> kept detectors
    mining_report: str

    # Stage 4: clustering
    template: TemplateDetectorSet

    # Stage 5: encoding and classification
    train_encodings: List[ActionEncoding]
    test_encodings: List[ActionEncoding]
    cv_scores: Dict[float, float]
    c_reg: float
    classifier: MulticlassModel

    # Stage 6: evaluation
    report: EvaluationReport

    # Workflow metadata
    workflow_start_time: float
    timings: Annotated[Dict[str, float], merge_dicts]  # stage -> seconds


class MiningTaskState(TypedDict):
    """
    State for one mining task (parallel execution).

    Each task receives only the instance it mines and the shared read-only pool.
    """
    instance: InstanceTrajectorylets
    pool: TrajectoryletPool
    classes: List[int]              # dataset classes; histogram bins
    config: Dict[str, Any]
