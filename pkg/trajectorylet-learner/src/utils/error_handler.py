"""Error types and handling utilities for the learning pipeline

Stage failures abort the workflow with a stage-tagged error. Recoverable
problems (a skipped ESVM candidate, an empty cluster) are recorded in the
ErrorAccumulator and surfaced in the evaluation report instead.
"""

import inspect
import logging
import threading
import traceback
from datetime import datetime, timezone
from functools import wraps
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class TrajectoryletError(Exception):
    """Base class for all errors raised by this package."""


class SkeletonFormatError(TrajectoryletError, ValueError):
    """A skeleton file does not parse under the requested format."""

    def __init__(self, message: str, path: Optional[str] = None, frame: Optional[int] = None,
                 line: Optional[int] = None):
        self.path = path
        self.frame = frame
        self.line = line
        where = []
        if path:
            where.append(f"file={path}")
        if frame is not None:
            where.append(f"frame={frame}")
        if line is not None:
            where.append(f"line={line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class TopologyError(TrajectoryletError, ValueError):
    """Skeleton topology is not a spanning tree or does not match a reference."""


class DimensionMismatchError(TrajectoryletError, ValueError):
    """Vector or matrix dimensions disagree."""


class EmptySequenceError(TrajectoryletError, ValueError):
    """A sequence is too short for the requested operation."""


class ConfigurationError(TrajectoryletError, ValueError):
    """Invalid pipeline configuration."""


class ProtocolError(TrajectoryletError, ValueError):
    """Evaluation protocol cannot be applied to the dataset."""


class PipelineStageError(TrajectoryletError):
    """A workflow stage failed; carries the stage tag."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class ErrorAccumulator:
    """
    Accumulate non-fatal problems during a pipeline run.

    Thread-safe: mining and encoding fan out to worker threads.
    """

    def __init__(self):
        self._errors: List[Dict[str, Any]] = []
        self._lock = threading.Lock()

    def add_error(self, node: str, error: str, details: Optional[Dict[str, Any]] = None):
        """Add an entry to the accumulator"""
        with self._lock:
            error_entry = {
                "node": node,
                "error": error,
                "timestamp": self._get_timestamp(),
            }
            if details:
                error_entry["details"] = details

            self._errors.append(error_entry)
        logger.warning(f"📝 [{node}] {error[:200]}")

    def get_errors(self) -> list:
        """Get all accumulated entries"""
        with self._lock:
            return list(self._errors)

    def has_errors(self) -> bool:
        with self._lock:
            return len(self._errors) > 0

    def get_summary(self) -> str:
        """Get a formatted summary of all entries"""
        with self._lock:
            if not self._errors:
                return "No warnings recorded during the run."

            lines = [f"{len(self._errors)} warning(s):"]
            for i, error in enumerate(self._errors, 1):
                line = f"{i}. [{error['node']}] {error['error']}"
                if 'details' in error:
                    line += f" {error['details']}"
                lines.append(line)
            return "\n".join(lines)

    def clear(self):
        with self._lock:
            self._errors.clear()

    @staticmethod
    def _get_timestamp() -> str:
        return datetime.now(timezone.utc).isoformat()


# Global error accumulator for the current run
_workflow_error_accumulator: Optional[ErrorAccumulator] = None


def get_error_accumulator() -> ErrorAccumulator:
    """Get or create global error accumulator"""
    global _workflow_error_accumulator
    if _workflow_error_accumulator is None:
        _workflow_error_accumulator = ErrorAccumulator()
    return _workflow_error_accumulator


def reset_error_accumulator():
    """Reset global error accumulator (call at workflow start)"""
    global _workflow_error_accumulator
    _workflow_error_accumulator = ErrorAccumulator()


def stage_guard(stage: str):
    """
    Decorator for workflow nodes: tag any failure with the stage name.

    The traceback is logged, the failure is recorded in the accumulator and a
    PipelineStageError is raised so the workflow aborts before the bundle is
    written.

    Usage:
        @stage_guard("clustering")
        def clustering_node(state):
            ...
    """

    def fail(e: Exception) -> PipelineStageError:
        logger.error(f"❌ ERROR in {stage}: {e}")
        logger.debug(traceback.format_exc())
        get_error_accumulator().add_error(stage, f"{type(e).__name__}: {e}")
        return PipelineStageError(stage, e)

    def decorator(func: Callable):
        if inspect.iscoroutinefunction(func):
            @wraps(func)
            async def async_wrapper(*args, **kwargs):
                try:
                    return await func(*args, **kwargs)
                except PipelineStageError:
                    raise
                except Exception as e:
                    raise fail(e) from e

            return async_wrapper

        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except PipelineStageError:
                raise
            except Exception as e:
                raise fail(e) from e

        return wrapper
    return decorator


def safe_execute(func: Callable, *args, context: str = "operation", node: str = "pipeline", **kwargs) -> Any:
    """
    Execute a function, recording any failure and returning None.

    Usage:
        detector = safe_execute(train_esvm, x, negatives, params, context="ESVM t=3")
    """
    try:
        return func(*args, **kwargs)
    except Exception as e:
        get_error_accumulator().add_error(node, f"{context} skipped: {type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())
        return None
