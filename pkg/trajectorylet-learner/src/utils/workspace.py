"""Workspace Management

Centralized output directory for pipeline runs.

Structure:
workspace/
├── bundles/        # Saved model bundles, one directory per run name
├── reports/        # Evaluation and sweep reports
├── logs/           # Run log (pipeline_runs.jsonl)
└── temp/           # Staging area; bundles are written here then renamed
"""

import logging
import os
import re
import shutil
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)


def safe_name(name: str) -> str:
    """Sanitize a run name for use as a file or directory name"""
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("._")
    return cleaned[:80] or "run"


class Workspace:
    """Centralized workspace manager"""

    def __init__(self, base_path: Optional[str] = None):
        """
        Initialize workspace.

        Args:
            base_path: Base workspace path. If None, uses './workspace'
        """
        if base_path is None:
            base_path = os.path.join(os.getcwd(), "workspace")

        self.base_path = Path(base_path)
        self.bundles_dir = self.base_path / "bundles"
        self.reports_dir = self.base_path / "reports"
        self.logs_dir = self.base_path / "logs"
        self.temp_dir = self.base_path / "temp"

        self._create_directories()

    def _create_directories(self):
        for directory in [self.base_path, self.bundles_dir, self.reports_dir, self.logs_dir, self.temp_dir]:
            directory.mkdir(parents=True, exist_ok=True)

    def get_bundle_path(self, run_name: str) -> Path:
        return self.bundles_dir / safe_name(run_name)

    def get_report_path(self, run_name: str, suffix: str = ".txt") -> Path:
        return self.reports_dir / f"{safe_name(run_name)}{suffix}"

    def get_temp_dir(self, run_name: str) -> Path:
        """Fresh staging directory for one run"""
        staging = self.temp_dir / safe_name(run_name)
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        return staging


# Global workspace instance
_workspace: Optional[Workspace] = None


def get_workspace(base_path: Optional[str] = None) -> Workspace:
    """
    Get or create global workspace instance.

    Args:
        base_path: Optional base path override
    """
    global _workspace

    if _workspace is None or (base_path is not None and Path(base_path) != _workspace.base_path):
        _workspace = Workspace(base_path)

    return _workspace


def reset_workspace():
    """Reset workspace (for testing)"""
    global _workspace
    _workspace = None
