"""Model bundles: every learned artifact of a run as a directory of text files

Layout (file names follow the producing module):

    config.txt                 PipelineConfig echo (key=value)
    limb_reference.txt         skeleton_io: `p:c length` per edge
    pca_model.txt              trajectorylet: `d raw_dim`, mean row, basis rows
    template_detectors.txt     detector_clustering: K metadata + weight rows
    cluster_assignments.txt    detector_clustering: `detector_index cluster_index`
    mining_report.txt          detector_mining: `instance class frame P_t mean_top_score`
    classifier.txt             linear_svm: one-vs-all model
    train_encodings.txt        encoding: `label v_1 ... v_dim`
    test_encodings.txt
    report.txt, metrics.txt    harness: evaluation report

A bundle is staged in the workspace temp directory and renamed into place
only once every file is written.
"""

import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.config.pipeline_config import PipelineConfig
from src.features.skeleton_io import LimbReference, SkeletonSequence
from src.features.trajectorylet import PcaModel, extract_instances
from src.harness.reports import EvaluationReport, build_report
from src.learning.detector_clustering import TemplateDetectorSet
from src.learning.encoding import ActionEncoding, encode_batch, encodings_to_text
from src.learning.linear_svm import MulticlassModel, multiclass_from_text, multiclass_to_text, predict_batch
from src.utils.config_loader import ConfigLoader
from src.utils.error_handler import TrajectoryletError
from src.utils.workspace import get_workspace

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.txt"
LIMB_REFERENCE_FILE = "limb_reference.txt"
PCA_FILE = "pca_model.txt"
TEMPLATE_FILE = "template_detectors.txt"
ASSIGNMENTS_FILE = "cluster_assignments.txt"
MINING_REPORT_FILE = "mining_report.txt"
CLASSIFIER_FILE = "classifier.txt"
TRAIN_ENCODINGS_FILE = "train_encodings.txt"
TEST_ENCODINGS_FILE = "test_encodings.txt"

REQUIRED_FILES = (CONFIG_FILE, LIMB_REFERENCE_FILE, PCA_FILE, TEMPLATE_FILE, CLASSIFIER_FILE)


class BundleError(TrajectoryletError):
    """Missing or unreadable bundle file"""


@dataclass
class ModelBundle:
    config: PipelineConfig
    limb_reference: LimbReference
    pca_model: PcaModel
    template: TemplateDetectorSet
    classifier: MulticlassModel
    mining_report: str = ""
    train_encodings: Optional[List[ActionEncoding]] = None
    test_encodings: Optional[List[ActionEncoding]] = None
    report: Optional[EvaluationReport] = None

    def files(self) -> Dict[str, str]:
        files = {
            CONFIG_FILE: self.config.to_text(),
            LIMB_REFERENCE_FILE: self.limb_reference.to_text(),
            PCA_FILE: self.pca_model.to_text(),
            TEMPLATE_FILE: self.template.to_text(),
            ASSIGNMENTS_FILE: self.template.assignments_text(),
            MINING_REPORT_FILE: self.mining_report,
            CLASSIFIER_FILE: multiclass_to_text(self.classifier),
        }
        if self.train_encodings is not None:
            files[TRAIN_ENCODINGS_FILE] = encodings_to_text(self.train_encodings)
        if self.test_encodings is not None:
            files[TEST_ENCODINGS_FILE] = encodings_to_text(self.test_encodings)
        if self.report is not None:
            files["report.txt"] = self.report.to_text()
            files["metrics.txt"] = self.report.to_metrics()
        return files

    def save(self, target: Union[str, Path], staging: Optional[Union[str, Path]] = None) -> Path:
        """Write into a staging directory, then replace `target` in one rename."""
        target = Path(target)
        if staging is None:
            staging = get_workspace().get_temp_dir(target.name)
        staging = Path(staging)
        staging.mkdir(parents=True, exist_ok=True)

        for name, text in self.files().items():
            (staging / name).write_text(text, encoding="utf-8")

        target.parent.mkdir(parents=True, exist_ok=True)
        if target.exists():
            shutil.rmtree(target)
        shutil.move(str(staging), str(target))
        logger.info(f"💾 Bundle saved: {target}")
        return target

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "ModelBundle":
        directory = Path(directory)
        missing = [name for name in REQUIRED_FILES if not (directory / name).is_file()]
        if missing:
            raise BundleError(f"bundle {directory} is missing {', '.join(missing)}")

        def read(name: str) -> str:
            path = directory / name
            return path.read_text(encoding="utf-8") if path.is_file() else ""

        config = ConfigLoader(use_dotenv=False).load_config(directory / CONFIG_FILE, environ={})
        try:
            return cls(
                config=config,
                limb_reference=LimbReference.from_text(read(LIMB_REFERENCE_FILE)),
                pca_model=PcaModel.from_text(read(PCA_FILE)),
                template=TemplateDetectorSet.from_text(read(TEMPLATE_FILE), read(ASSIGNMENTS_FILE)),
                classifier=multiclass_from_text(read(CLASSIFIER_FILE)),
                mining_report=read(MINING_REPORT_FILE),
            )
        except (ValueError, KeyError, IndexError) as e:
            raise BundleError(f"bundle {directory} is unreadable: {e}") from e

    def predict(self, sequences: Sequence[SkeletonSequence]) -> List[int]:
        """Classify raw sequences with the stored preprocessing and models."""
        instances = extract_instances(sequences, self.config.trajectorylet_config(), self.limb_reference)
        reduced = [inst.reduced(self.pca_model) for inst in instances]
        encodings = encode_batch(self.template, reduced, self.config.pyramid_levels)
        return predict_batch(self.classifier, encodings).tolist()


def evaluate_bundle(
    bundle: ModelBundle,
    sequences: Sequence[SkeletonSequence],
    name: str = "evaluate",
) -> EvaluationReport:
    """Report of a saved bundle on labelled sequences."""
    predictions = bundle.predict(sequences)
    truth = [s.class_label for s in sequences]
    classes = sorted(set(bundle.classifier.classes) | set(truth))
    return build_report(
        name, bundle.config.dataset, truth, predictions, classes,
        config_text=bundle.config.to_text(),
        c_reg=bundle.classifier.c_reg,
        template_size=bundle.template.size,
        candidate_count=len(bundle.mining_report.splitlines()),
    )
