"""Stage 2: Preprocessing Node

Size normalization, hip-centering, trajectorylet extraction and PCA. The
limb reference and the PCA model are learned from the training split only.
"""

import logging
import time
from typing import Any, Dict

import numpy as np
from langsmith import traceable

from src.config.pipeline_config import PipelineConfig
from src.features.skeleton_io import compute_reference_limb_lengths
from src.features.trajectorylet import extract_instances, fit_pca
from src.state import PipelineState
from src.utils.error_handler import stage_guard

logger = logging.getLogger(__name__)


@traceable(name="preprocessing_node")
@stage_guard("preprocessing")
async def preprocessing_node(state: PipelineState) -> Dict[str, Any]:
    """
    Stage 2: Turn sequences into PCA-reduced trajectorylets.

    Returns:
        Dict with limb_reference, pca_model, train_instances, test_instances
    """
    config = PipelineConfig.model_validate(state["config"])
    traj_config = config.trajectorylet_config()
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 2: PREPROCESSING")
    logger.info("=" * 80)

    train_sequences = state["train_sequences"]
    limb_reference = compute_reference_limb_lengths(train_sequences)
    train_raw = extract_instances(train_sequences, traj_config, limb_reference)
    test_raw = extract_instances(state.get("test_sequences", []), traj_config, limb_reference)

    pca_model = fit_pca(np.vstack([inst.values for inst in train_raw]), traj_config.pca_retain_fraction)
    train_instances = [inst.reduced(pca_model) for inst in train_raw]
    test_instances = [inst.reduced(pca_model) for inst in test_raw]

    total = sum(inst.count for inst in train_instances)
    logger.info(f"Extracted {total} training trajectorylets "
                f"(dim {pca_model.raw_dim} -> {pca_model.retained_dim})")
    return {
        "limb_reference": limb_reference,
        "pca_model": pca_model,
        "train_instances": train_instances,
        "test_instances": test_instances,
        "timings": {"preprocessing": time.time() - start_time},
    }
