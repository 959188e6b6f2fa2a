"""Stage 4: Clustering Node

Deduplicates the candidate union into the K-detector template set.
"""

import logging
import time
from typing import Any, Dict

from langsmith import traceable

from src.config.pipeline_config import PipelineConfig
from src.learning.detector_clustering import build_template_set
from src.learning.detector_mining import flatten_mined
from src.state import PipelineState
from src.utils.error_handler import stage_guard

logger = logging.getLogger(__name__)


@traceable(name="clustering_node")
@stage_guard("clustering")
async def clustering_node(state: PipelineState) -> Dict[str, Any]:
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 4: DETECTOR CLUSTERING")
    logger.info("=" * 80)

    detectors = [m.detector for m in flatten_mined(state["mined"])]
    template = build_template_set(detectors, state["pool"].values, config.n_clusters, config.cluster_seed)

    return {
        "template": template,
        "timings": {"clustering": time.time() - start_time},
    }
