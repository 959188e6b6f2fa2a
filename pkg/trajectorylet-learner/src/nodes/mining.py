"""Stage 3: Detector Mining Nodes

pool_sampling_node draws the shared pool once; mine_instance_node then runs
in PARALLEL for each training instance (Send API), each ESVM batch in a
worker thread under the "mining" semaphore; aggregate_mining (deferred)
waits for all of them and writes the mining report in instance-id order.
"""

import asyncio
import logging
import time
from typing import Any, Dict, List

from langgraph.types import Send
from langsmith import traceable

from src.config.pipeline_config import PipelineConfig
from src.learning.detector_mining import flatten_mined, format_mining_report, mine_instance_detectors, sample_pool
from src.state import MiningTaskState, PipelineState
from src.utils.concurrency import limit_concurrency
from src.utils.error_handler import EmptySequenceError, ProtocolError, stage_guard

logger = logging.getLogger(__name__)


@traceable(name="pool_sampling_node")
@stage_guard("mining")
async def pool_sampling_node(state: PipelineState) -> Dict[str, Any]:
    """Sample the pool from training trajectorylets and precompute its Gram matrix."""
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 3: DETECTOR MINING (Parallel)")
    logger.info("=" * 80)

    train_instances = state["train_instances"]
    pool = sample_pool(train_instances, config.pool_size, config.pool_seed)

    train_ids = {inst.instance_id for inst in train_instances}
    leaked = set(pool.instance_ids.tolist()) - train_ids
    if leaked:
        raise ProtocolError(f"pool contains non-training instances: {sorted(leaked)[:5]}")
    if len(pool.classes) < 2:
        raise EmptySequenceError(f"pool covers a single class {pool.classes}; no negatives to mine against")

    if pool.gram(config.gram_cache_limit) is None:
        logger.info(f"Pool of {pool.size} exceeds gram_cache_limit={config.gram_cache_limit}; kernel columns on demand")
    return {"pool": pool, "mining_started": start_time}


def continue_to_mining(state: PipelineState) -> List[Send]:
    """Fan-out: one mining task per training instance."""
    instances = state.get("train_instances", [])
    classes = sorted({inst.class_label for inst in instances})
    sends = [
        Send("mine_instance", {"instance": inst, "pool": state["pool"], "classes": classes, "config": state["config"]})
        for inst in instances
    ]
    logger.info(f"📤 Fanning out to {len(sends)} parallel mining tasks...")
    return sends


@traceable(name="mine_instance_node")
@stage_guard("mining")
async def mine_instance_node(state: MiningTaskState) -> Dict[str, Any]:
    """
    Train one ESVM per trajectorylet of the instance and keep the M_A purest.

    Returns:
        Dict with mined = {instance_id: [MinedDetector, ...]}
    """
    config = PipelineConfig.model_validate(state["config"])
    instance = state["instance"]

    async with limit_concurrency("mining", instance.instance_id):
        kept = await asyncio.to_thread(
            mine_instance_detectors,
            instance,
            state["pool"],
            config.esvm_params(),
            config.mining_params(),
            config.gram_cache_limit,
            state.get("classes"),
        )

    logger.info(f"⛏️  {instance.instance_id}: kept {len(kept)} detector(s)")
    return {"mined": {instance.instance_id: kept}}


@traceable(name="aggregate_mining")
@stage_guard("mining")
async def aggregate_mining(state: PipelineState) -> Dict[str, Any]:
    """Aggregator node - waits for all mining tasks to complete"""
    mined = dict(sorted((state.get("mined") or {}).items()))
    candidates = flatten_mined(mined)
    if not candidates:
        raise EmptySequenceError("mining produced no candidate detectors")

    logger.info(f"Mined {len(candidates)} candidate detectors from {len(mined)} instances")
    return {
        "mined": mined,
        "mining_report": format_mining_report(mined),
        "timings": {"mining": time.time() - state.get("mining_started", time.time())},
    }
