"""Concurrency control utilities for workflow nodes

Semaphore-based limiting for parallel node executions. Each node type can
have its own limit so fan-out stages (one ESVM mining task per training
instance) do not oversubscribe the CPU.

Usage:
    async with limit_concurrency("mining", instance_id):
        detectors = await asyncio.to_thread(mine_instance_detectors, ...)
"""

import asyncio
import logging
from contextlib import asynccontextmanager
from typing import Dict, Optional

from src.config.pipeline_config import CONCURRENCY_LIMITS, DEFAULT_CONCURRENCY_LIMIT

logger = logging.getLogger(__name__)

# Key: node type, value: semaphore bound to the running event loop
_semaphores: Dict[str, asyncio.Semaphore] = {}


def get_node_semaphore(node_type: str) -> Optional[asyncio.Semaphore]:
    """
    Get or create a semaphore for a node type.

    Returns:
        asyncio.Semaphore if a limit is set, None if unlimited
    """
    limit = CONCURRENCY_LIMITS.get(node_type, DEFAULT_CONCURRENCY_LIMIT)
    if limit is None:
        return None

    if node_type not in _semaphores:
        _semaphores[node_type] = asyncio.Semaphore(limit)
        logger.debug(f"🔒 Created semaphore for '{node_type}' with limit={limit}")
    return _semaphores[node_type]


@asynccontextmanager
async def limit_concurrency(node_type: str, node_name: str = ""):
    """
    Async context manager limiting concurrent executions of a node type.

    Args:
        node_type: Type of node (e.g., "mining")
        node_name: Optional name for logging (e.g., instance id)
    """
    semaphore = get_node_semaphore(node_type)
    if semaphore is None:
        yield
        return

    async with semaphore:
        logger.debug(f"▶️  [{node_type}] Starting: {node_name or 'task'}")
        try:
            yield
        finally:
            logger.debug(f"✅ [{node_type}] Completed: {node_name or 'task'}")


def reset_semaphores():
    """Drop all semaphores; call between runs, never while nodes are running."""
    _semaphores.clear()


def get_current_limits() -> Dict[str, Optional[int]]:
    return CONCURRENCY_LIMITS.copy()


def update_limit(node_type: str, limit: Optional[int]):
    """
    Update the concurrency limit for a node type.

    The semaphore is recreated on next use; running tasks keep the old one.
    """
    CONCURRENCY_LIMITS[node_type] = limit
    _semaphores.pop(node_type, None)
    logger.debug(f"🔧 Updated '{node_type}' concurrency limit to {limit}")
