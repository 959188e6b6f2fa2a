"""Stage 1: Data Loading Node

Loads skeleton sequences (unless the caller passed splits in) and checks
split hygiene: no subject may appear on both sides.
"""

import logging
import time
from typing import Any, Dict

from langsmith import traceable

from src.config.pipeline_config import PipelineConfig
from src.features.skeleton_io import load_dataset
from src.harness.protocols import ProtocolSpec, split_dataset
from src.state import PipelineState
from src.utils.error_handler import ProtocolError, stage_guard

logger = logging.getLogger(__name__)


@traceable(name="data_loading_node")
@stage_guard("data_loading")
async def data_loading_node(state: PipelineState) -> Dict[str, Any]:
    """
    Stage 1: Provide the train and test splits.

    Returns:
        Dict with train_sequences, test_sequences and the stage timing
    """
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 1: DATA LOADING")
    logger.info("=" * 80)

    train = state.get("train_sequences")
    test = state.get("test_sequences")
    if train is None or test is None:
        if not config.data_dir:
            raise ProtocolError("no data_dir configured and no sequences supplied")
        protocol = ProtocolSpec.from_config(config)
        if protocol.kind == "as_subsets":
            raise ProtocolError("as_subsets runs one pipeline per action subset; use evaluate_protocol")
        sequences = load_dataset(config.data_dir, format=config.data_format,
                                 exclusion_list=config.exclusion_list, coordinates=config.coordinates,
                                 topology_name=config.resolved_topology())
        train, test = split_dataset(sequences, protocol, config.classes or None)

    if not train:
        raise ProtocolError("training split is empty")
    if not test:
        raise ProtocolError("test split is empty")
    shared = {s.subject_id for s in train} & {s.subject_id for s in test}
    if shared:
        raise ProtocolError(f"subjects {sorted(shared)} appear in both train and test")

    logger.info(f"Train: {len(train)} instances, classes {sorted({s.class_label for s in train})}")
    logger.info(f"Test:  {len(test)} instances")
    return {
        "train_sequences": list(train),
        "test_sequences": list(test),
        "timings": {"data_loading": time.time() - start_time},
    }
