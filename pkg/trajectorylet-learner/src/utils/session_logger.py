"""Run logging for pipeline executions"""
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class RunLogger:
    """Appends one JSON line per run event for auditing sweeps and reruns"""

    def __init__(self, log_dir: Optional[str] = None):
        """
        Args:
            log_dir: Directory to store run logs (default: workspace/logs)
        """
        if log_dir is None:
            from src.utils.workspace import get_workspace
            log_dir = get_workspace().logs_dir

        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.runs_file = self.log_dir / "pipeline_runs.jsonl"

    def _append(self, entry: Dict[str, Any]) -> None:
        entry["timestamp"] = datetime.now(timezone.utc).isoformat()
        with open(self.runs_file, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, ensure_ascii=False, default=str) + "\n")

    def log_run_start(self, run_id: str, run_name: str, config: Dict[str, Any]) -> None:
        self._append({"run_id": run_id, "run_name": run_name, "status": "started", "config": config})
        logger.debug(f"📝 Run logged: {self.runs_file}")

    def log_run_complete(self, run_id: str, metrics: Dict[str, Any], bundle_dir: Optional[str],
                         timings: Dict[str, float]) -> None:
        self._append({
            "run_id": run_id,
            "status": "completed",
            "metrics": metrics,
            "bundle_dir": bundle_dir,
            "timings": timings,
        })

    def log_run_failed(self, run_id: str, stage: str, error: str) -> None:
        self._append({"run_id": run_id, "status": "failed", "stage": stage, "error": error})

    def get_run_logs(self, run_id: Optional[str] = None) -> list:
        """Retrieve run log entries, optionally for one run"""
        if not self.runs_file.exists():
            return []

        logs = []
        with open(self.runs_file, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    entry = json.loads(line)
                    if run_id is None or entry.get("run_id") == run_id:
                        logs.append(entry)
        return logs


# Global run logger instance
_run_logger: Optional[RunLogger] = None


def get_run_logger(log_dir: Optional[str] = None) -> RunLogger:
    """Get or create global run logger instance"""
    global _run_logger
    if _run_logger is None or (log_dir is not None and Path(log_dir) != _run_logger.log_dir):
        _run_logger = RunLogger(log_dir)
    return _run_logger


def reset_run_logger():
    global _run_logger
    _run_logger = None
