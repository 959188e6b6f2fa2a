"""LangSmith configuration for tracing pipeline runs"""

import logging
import os
import uuid
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


def is_langsmith_enabled() -> bool:
    """
    Check if LangSmith tracing is enabled.

    Returns:
        True if LANGCHAIN_TRACING_V2 is set to true
    """
    return os.getenv("LANGCHAIN_TRACING_V2", "false").lower() == "true"


def get_langsmith_project() -> str:
    return os.getenv("LANGCHAIN_PROJECT", "trajectorylet-learner")


def create_run_config(
    run_name: str,
    tags: Optional[list] = None,
    metadata: Optional[dict] = None,
    run_id: Optional[str] = None,
    recursion_limit: int = 50,
) -> Dict[str, Any]:
    """
    Create the runnable configuration for workflow.ainvoke().

    Args:
        run_name: Name of the run (e.g., "train_action3d")
        tags: Extra tags (e.g., ["AS1"])
        metadata: Additional metadata dictionary
        run_id: Optional identifier used as the thread id
        recursion_limit: LangGraph super-step limit

    Returns:
        Configuration dictionary
    """
    if not run_id:
        run_id = f"trajectorylet-run-{uuid.uuid4()}"

    default_tags = ["trajectorylet"]
    if tags:
        default_tags.extend(tags)

    config = {
        "configurable": {"thread_id": run_id},
        "run_name": run_name,
        "tags": default_tags,
        "recursion_limit": recursion_limit,
    }
    if metadata:
        config["metadata"] = metadata

    return config


def log_langsmith_info():
    """Log LangSmith configuration information"""
    if is_langsmith_enabled():
        logger.info(f"📊 LangSmith tracing enabled (project: {get_langsmith_project()})")
    else:
        logger.debug("📊 LangSmith tracing disabled (set LANGCHAIN_TRACING_V2=true to enable)")
