"""Main workflow definition for trajectorylet learning

Sequential stages with one parallel fan-out:
1. START → initialize_run
2. initialize_run → data_loading (load + split, or caller-supplied splits)
3. data_loading → preprocessing (size normalization, hip-centering, extraction, PCA)
4. preprocessing → pool_sampling (shared pool + Gram matrix)
5. pool_sampling → mine_instance (parallel by training instance)
6. mine_instance → aggregate_mining (barrier: wait for all instances)
7. aggregate_mining → clustering (template detector set)
8. clustering → encoding (flat or pyramid)
9. encoding → classification (CV over C_reg + one-vs-all)
10. classification → evaluation (test split report)
11. evaluation → finalize (bundle + report files) → END

Any stage failure raises PipelineStageError; finalize never runs, so no
bundle is written.
"""

import asyncio
import logging
import time
import uuid
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from langgraph.graph import END, START, StateGraph

from src.config.langsmith_config import create_run_config, log_langsmith_info
from src.config.pipeline_config import PipelineConfig
from src.features.skeleton_io import SkeletonSequence
from src.harness.bundle import ModelBundle
from src.nodes.classification import classification_node, encoding_node, evaluation_node
from src.nodes.clustering import clustering_node
from src.nodes.data_loading import data_loading_node
from src.nodes.mining import aggregate_mining, continue_to_mining, mine_instance_node, pool_sampling_node
from src.nodes.preprocessing import preprocessing_node
from src.state import PipelineState
from src.utils.concurrency import reset_semaphores, update_limit
from src.utils.error_handler import PipelineStageError, reset_error_accumulator, stage_guard
from src.utils.session_logger import get_run_logger
from src.utils.workspace import get_workspace, safe_name

logger = logging.getLogger(__name__)


def initialize_run(state: PipelineState) -> dict:
    """Reset per-run globals and log the run start."""
    config = PipelineConfig.model_validate(state["config"])

    reset_error_accumulator()
    reset_semaphores()
    update_limit("mining", config.workers)

    logger.info("=" * 80)
    logger.info(f"RUN {state.get('run_name', 'run')} ({config.dataset})")
    logger.info("=" * 80)
    get_run_logger(str(get_workspace(config.output_dir).logs_dir)).log_run_start(
        state["run_id"], state.get("run_name", "run"), state["config"])
    return {"workflow_start_time": time.time()}


@stage_guard("finalize")
def finalize_workflow(state: PipelineState) -> dict:
    """
    Finalize workflow: persist the bundle and report, log completion.
    """
    config = PipelineConfig.model_validate(state["config"])
    workspace = get_workspace(config.output_dir)
    report = state["report"]
    run_name = state.get("run_name", "run")

    bundle = ModelBundle(
        config=config,
        limb_reference=state["limb_reference"],
        pca_model=state["pca_model"],
        template=state["template"],
        classifier=state["classifier"],
        mining_report=state.get("mining_report", ""),
        train_encodings=state.get("train_encodings"),
        test_encodings=state.get("test_encodings"),
        report=report,
    )

    bundle_dir = None
    if state.get("save_bundle", True):
        target = Path(state.get("bundle_dir") or workspace.get_bundle_path(run_name))
        bundle_dir = str(bundle.save(target, workspace.get_temp_dir(target.name)))

    report_path = workspace.get_report_path(run_name)
    report_path.write_text(report.to_text(), encoding="utf-8")
    workspace.get_report_path(run_name, ".metrics.txt").write_text(report.to_metrics(), encoding="utf-8")
    workspace.get_report_path(run_name, ".timings.txt").write_text(report.timings_text(), encoding="utf-8")

    elapsed = time.time() - state.get("workflow_start_time", time.time())
    get_run_logger(str(workspace.logs_dir)).log_run_complete(
        state["run_id"],
        metrics={"accuracy": report.accuracy, "c_reg": report.c_reg, "template_size": report.template_size},
        bundle_dir=bundle_dir,
        timings=report.timings,
    )

    logger.info("=" * 80)
    logger.info("WORKFLOW COMPLETE")
    logger.info("=" * 80)
    logger.info(f"✅ Total workflow time: {elapsed:.2f}s")
    logger.info(f"📊 Accuracy: {report.accuracy:.4f}")
    logger.info(f"📁 Report: {report_path}")
    if bundle_dir:
        logger.info(f"💾 Bundle: {bundle_dir}")

    return {"bundle_dir": bundle_dir}


def create_workflow():
    """
    Create the learning workflow.

    Returns:
        Compiled LangGraph workflow
    """
    workflow = StateGraph(PipelineState)

    workflow.add_node("initialize_run", initialize_run)
    workflow.add_node("data_loading", data_loading_node)
    workflow.add_node("preprocessing", preprocessing_node)
    workflow.add_node("pool_sampling", pool_sampling_node)
    workflow.add_node("mine_instance", mine_instance_node)
    workflow.add_node("aggregate_mining", aggregate_mining, defer=True)  # Aggregator - waits for all incoming
    workflow.add_node("clustering", clustering_node)
    workflow.add_node("encoding", encoding_node)
    workflow.add_node("classification", classification_node)
    workflow.add_node("evaluation", evaluation_node)
    workflow.add_node("finalize", finalize_workflow)

    workflow.add_edge(START, "initialize_run")
    workflow.add_edge("initialize_run", "data_loading")
    workflow.add_edge("data_loading", "preprocessing")
    workflow.add_edge("preprocessing", "pool_sampling")

    # pool_sampling → mine_instance (parallel by training instance)
    workflow.add_conditional_edges("pool_sampling", continue_to_mining, ["mine_instance"])

    # mine_instance → aggregate_mining (automatic fan-in with defer=True)
    workflow.add_edge("mine_instance", "aggregate_mining")
    workflow.add_edge("aggregate_mining", "clustering")
    workflow.add_edge("clustering", "encoding")
    workflow.add_edge("encoding", "classification")
    workflow.add_edge("classification", "evaluation")
    workflow.add_edge("evaluation", "finalize")
    workflow.add_edge("finalize", END)

    return workflow.compile()


async def run_pipeline(
    config: PipelineConfig,
    train_sequences: Optional[Sequence[SkeletonSequence]] = None,
    test_sequences: Optional[Sequence[SkeletonSequence]] = None,
    run_name: Optional[str] = None,
    save_bundle: bool = True,
    bundle_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Run every stage once and return the final workflow state.

    Without explicit splits the data is loaded from config.data_dir and split
    per config.protocol. The returned state carries `report`, `bundle_dir`
    and every intermediate artifact.

    Raises:
        PipelineStageError: tagged with the failing stage
    """
    run_name = safe_name(run_name or f"train_{config.dataset}")
    run_id = f"{run_name}-{uuid.uuid4().hex[:8]}"
    log_langsmith_info()

    state: PipelineState = {
        "run_name": run_name,
        "run_id": run_id,
        "config": config.model_dump(),
        "save_bundle": save_bundle,
        "bundle_dir": bundle_dir,
    }
    if train_sequences is not None:
        state["train_sequences"] = list(train_sequences)
    if test_sequences is not None:
        state["test_sequences"] = list(test_sequences)

    run_config = create_run_config(run_name, tags=[config.dataset], metadata={"run_id": run_id}, run_id=run_id)
    app = create_workflow()
    try:
        return await app.ainvoke(state, config=run_config)
    except PipelineStageError as e:
        get_run_logger(str(get_workspace(config.output_dir).logs_dir)).log_run_failed(run_id, e.stage, str(e))
        raise


def run_pipeline_sync(config: PipelineConfig, **kwargs) -> Dict[str, Any]:
    """Blocking wrapper around run_pipeline for scripts and tests"""
    return asyncio.run(run_pipeline(config, **kwargs))
