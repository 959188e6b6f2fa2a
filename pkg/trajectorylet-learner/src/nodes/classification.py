"""Stage 5-6: Encoding, Classification and Evaluation Nodes

Encodes every instance with the template set (flat or pyramid), picks C_reg
by stratified cross-validation on the training encodings, trains the
one-vs-all model and scores the test split.
"""

import asyncio
import logging
import time
from typing import Any, Dict, List

import numpy as np
from langsmith import traceable

from src.config.pipeline_config import PipelineConfig
from src.harness.reports import build_report
from src.learning.encoding import ActionEncoding, encode_batch, encoding_matrix
from src.learning.linear_svm import cross_validation_scores, predict_batch, train_ova_svm
from src.state import PipelineState
from src.utils.concurrency import limit_concurrency
from src.utils.error_handler import get_error_accumulator, stage_guard

logger = logging.getLogger(__name__)


@traceable(name="encoding_node")
@stage_guard("encoding")
async def encoding_node(state: PipelineState) -> Dict[str, Any]:
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info(f"STAGE 5: ENCODING (pyramid levels={config.pyramid_levels})")
    logger.info("=" * 80)

    template = state["template"]
    async with limit_concurrency("encoding", "train+test"):
        train_encodings, test_encodings = await asyncio.gather(
            asyncio.to_thread(encode_batch, template, state["train_instances"], config.pyramid_levels),
            asyncio.to_thread(encode_batch, template, state.get("test_instances", []), config.pyramid_levels),
        )

    logger.info(f"Encoded {len(train_encodings)} train / {len(test_encodings)} test instances "
                f"(dim {train_encodings[0].dim})")
    return {
        "train_encodings": train_encodings,
        "test_encodings": test_encodings,
        "timings": {"encoding": time.time() - start_time},
    }


def _cv_folds(labels: np.ndarray, requested: int) -> int:
    """Folds capped by the smallest class; 0 when some class has a single instance."""
    smallest = int(np.unique(labels, return_counts=True)[1].min())
    folds = min(requested, smallest)
    return folds if folds >= 2 else 0


@traceable(name="classification_node")
@stage_guard("classification")
async def classification_node(state: PipelineState) -> Dict[str, Any]:
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 6: ONE-VS-ALL CLASSIFIER")
    logger.info("=" * 80)

    encodings: List[ActionEncoding] = state["train_encodings"]
    matrix = encoding_matrix(encodings)
    labels = np.array([e.label for e in encodings], dtype=int)
    grid = sorted(config.cv_grid)

    folds = _cv_folds(labels, config.cv_folds)
    accumulator = get_error_accumulator()
    if folds == 0:
        c_reg = grid[len(grid) // 2]
        cv_scores: Dict[float, float] = {}
        accumulator.add_error("classification", f"a class has one training instance; skipped CV, C_reg={c_reg:g}")
    else:
        if folds < config.cv_folds:
            accumulator.add_error("classification", f"cross-validation reduced to {folds} folds by class size")
        cv_scores = await asyncio.to_thread(cross_validation_scores, matrix, labels, grid, folds, config.cv_seed,
                                            config.svm_max_iterations, config.svm_tolerance)
        best = max(cv_scores.values())
        c_reg = min(c for c, acc in cv_scores.items() if acc == best)
        logger.info(f"Cross-validation chose C_reg={c_reg:g} (mean accuracy {best:.4f})")

    classifier = await asyncio.to_thread(train_ova_svm, matrix, labels, c_reg, config.svm_max_iterations,
                                         config.svm_tolerance, None, config.gram_cache_limit)
    return {
        "cv_scores": cv_scores,
        "c_reg": c_reg,
        "classifier": classifier,
        "timings": {"classification": time.time() - start_time},
    }


@traceable(name="evaluation_node")
@stage_guard("evaluation")
async def evaluation_node(state: PipelineState) -> Dict[str, Any]:
    config = PipelineConfig.model_validate(state["config"])
    start_time = time.time()

    logger.info("=" * 80)
    logger.info("STAGE 7: EVALUATION")
    logger.info("=" * 80)

    classifier = state["classifier"]
    test_encodings: List[ActionEncoding] = state.get("test_encodings", [])
    truth = [e.label for e in test_encodings]
    predictions = predict_batch(classifier, test_encodings).tolist() if test_encodings else []
    classes = sorted(set(classifier.classes) | set(truth))

    # worker threads record in completion order
    warnings = sorted(f"[{e['node']}] {e['error']}" for e in get_error_accumulator().get_errors())
    timings = dict(state.get("timings") or {})
    timings["evaluation"] = time.time() - start_time

    report = build_report(
        state.get("run_name", "run"), config.dataset, truth, predictions, classes,
        config_text=config.to_text(),
        timings=timings,
        warnings=warnings,
        c_reg=state["c_reg"],
        cv_scores=state.get("cv_scores", {}),
        template_size=state["template"].size,
        candidate_count=sum(len(v) for v in state["mined"].values()),
    )
    logger.info(f"🎯 Test accuracy: {report.accuracy:.4f} ({report.total} instances)")
    return {"report": report, "timings": {"evaluation": timings["evaluation"]}}
