"""Evaluation reports: accuracy, per-class table, confusion matrix"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from src.config.datasets import get_class_name

logger = logging.getLogger(__name__)


@dataclass
class EvaluationReport:
    """
    Test-split results of one pipeline run.

    Confusion rows are true classes, columns predictions, both in `classes`
    order. Timings are kept out of the text and metric renderings unless asked
    for, so reruns produce identical report files.
    """
    name: str
    dataset: str
    classes: List[int]
    confusion: np.ndarray
    config_text: str = ""
    timings: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    c_reg: Optional[float] = None
    cv_scores: Dict[float, float] = field(default_factory=dict)
    template_size: int = 0
    candidate_count: int = 0

    @property
    def test_counts(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total if self.total else 0.0

    @property
    def per_class_accuracy(self) -> np.ndarray:
        counts = self.test_counts
        return np.divide(np.diag(self.confusion), counts, out=np.zeros(len(self.classes)), where=counts > 0)

    def per_class_table(self) -> pd.DataFrame:
        return pd.DataFrame({
            "class": self.classes,
            "name": [get_class_name(self.dataset, c) for c in self.classes],
            "correct": np.diag(self.confusion).astype(int),
            "total": self.test_counts.astype(int),
            "accuracy": np.round(self.per_class_accuracy, 4),
        })

    def confusion_table(self) -> pd.DataFrame:
        return pd.DataFrame(self.confusion.astype(int), index=pd.Index(self.classes, name="true"),
                            columns=pd.Index(self.classes, name="pred"))

    def to_metrics(self) -> str:
        """Machine-readable `metric value` lines."""
        lines = [f"accuracy {self.accuracy!r}", f"test_instances {self.total}"]
        if self.c_reg is not None:
            lines.append(f"c_reg {self.c_reg!r}")
        lines.append(f"template_size {self.template_size}")
        lines.append(f"candidate_detectors {self.candidate_count}")
        for c, acc in zip(self.classes, self.per_class_accuracy.tolist()):
            lines.append(f"class_{c}_accuracy {acc!r}")
        lines.append(f"warnings {len(self.warnings)}")
        return "\n".join(lines) + "\n"

    def timings_text(self) -> str:
        return "".join(f"{stage} {seconds:.3f}\n" for stage, seconds in self.timings.items())

    def to_text(self, include_timings: bool = False) -> str:
        """Human-readable report."""
        rule = "=" * 72
        parts = [
            rule,
            f"EVALUATION REPORT: {self.name} ({self.dataset})",
            rule,
            f"Accuracy: {self.accuracy:.4f} ({int(np.trace(self.confusion))}/{self.total})",
        ]
        if self.c_reg is not None:
            parts.append(f"Chosen C_reg: {self.c_reg:g}")
        parts.append(f"Template detectors: {self.template_size} (from {self.candidate_count} candidates)")
        parts += ["", "Per-class accuracy:", self.per_class_table().to_string(index=False),
                  "", "Confusion matrix (rows: true, columns: predicted):", self.confusion_table().to_string()]
        if self.cv_scores:
            parts += ["", "Cross-validation:"]
            parts += [f"  C={c:g}  mean accuracy {acc:.4f}" for c, acc in sorted(self.cv_scores.items())]
        parts += ["", "Warnings:"]
        parts += [f"  - {w}" for w in self.warnings] or ["  (none)"]
        if include_timings and self.timings:
            parts += ["", "Stage timings (s):"]
            parts += [f"  {stage:<12} {seconds:8.3f}" for stage, seconds in self.timings.items()]
        if self.config_text:
            parts += ["", "Configuration:", self.config_text.rstrip()]
        return "\n".join(parts) + "\n"

    def write(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.txt").write_text(self.to_text(), encoding="utf-8")
        (directory / "metrics.txt").write_text(self.to_metrics(), encoding="utf-8")
        return directory


def build_report(
    name: str,
    dataset: str,
    y_true: Sequence[int],
    y_pred: Sequence[int],
    classes: Optional[Sequence[int]] = None,
    **extra,
) -> EvaluationReport:
    """Confusion matrix over `classes` (default: classes seen in y_true or y_pred)."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if classes is None:
        classes = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    classes = [int(c) for c in classes]
    matrix = confusion_matrix(y_true, y_pred, labels=classes)
    return EvaluationReport(name=name, dataset=dataset, classes=classes, confusion=matrix, **extra)


@dataclass
class ProtocolOutcome:
    """Reports of one protocol evaluation (one per split; three for action subsets)."""
    protocol: str
    reports: Dict[str, EvaluationReport]
    bundle_dirs: Dict[str, Optional[str]] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.reports.values()])) if self.reports else 0.0

    def summary_table(self) -> pd.DataFrame:
        rows = [{"split": name, "accuracy": round(r.accuracy, 4), "test_instances": r.total}
                for name, r in self.reports.items()]
        if len(rows) > 1:
            rows.append({"split": "mean", "accuracy": round(self.mean_accuracy, 4),
                         "test_instances": sum(r.total for r in self.reports.values())})
        return pd.DataFrame(rows)

    def to_metrics(self) -> str:
        lines = [f"{name}_accuracy {r.accuracy!r}" for name, r in self.reports.items()]
        lines.append(f"mean_accuracy {self.mean_accuracy!r}")
        return "\n".join(lines) + "\n"

    def to_text(self, include_timings: bool = False) -> str:
        parts = [f"Protocol: {self.protocol}", self.summary_table().to_string(index=False), ""]
        parts += [r.to_text(include_timings) for r in self.reports.values()]
        return "\n".join(parts)
