"""Parameter sweeps: one protocol evaluation per setting"""

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from src.config.pipeline_config import SWEEP_PARAMETERS, PipelineConfig
from src.features.skeleton_io import SkeletonSequence
from src.harness.protocols import ProtocolSpec, evaluate_protocol
from src.utils.error_handler import ConfigurationError, TrajectoryletError

logger = logging.getLogger(__name__)


def parse_sweep_values(parameter: str, text: str) -> List[Any]:
    """
    Comma-separated values; components values join names with '+'.

    Example: parse_sweep_values("components", "x0,x0+x1") -> [["x0"], ["x0", "x1"]]
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"unknown sweep parameter {parameter!r}; expected one of {sorted(SWEEP_PARAMETERS)}")
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ConfigurationError(f"no values given for sweep parameter {parameter}")
    if parameter == "components":
        return [[name.strip() for name in item.split("+") if name.strip()] for item in items]
    try:
        return [int(item) for item in items]
    except ValueError as e:
        raise ConfigurationError(f"sweep values for {parameter} must be integers: {text!r}") from e


def format_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return "+".join(str(v) for v in value)
    return str(value)


@dataclass
class SweepResult:
    parameter: str
    table: pd.DataFrame
    second_parameter: Optional[str] = None

    def accuracy_table(self) -> pd.DataFrame:
        """One-way: the rows as run. Two-way: first parameter down, second across."""
        if self.second_parameter is None:
            return self.table
        return self.table.pivot(index=self.parameter, columns=self.second_parameter, values="accuracy")

    @property
    def failures(self) -> pd.DataFrame:
        return self.table[self.table["status"] != "ok"]

    def to_text(self) -> str:
        title = self.parameter if self.second_parameter is None else f"{self.parameter} x {self.second_parameter}"
        parts = [f"Sweep: {title}", self.accuracy_table().to_string(index=self.second_parameter is not None)]
        if self.second_parameter is not None and not self.failures.empty:
            parts += ["", "Failed cells:", self.failures.to_string(index=False)]
        return "\n".join(parts) + "\n"


def _cell_config(config: PipelineConfig, settings: Sequence[tuple]) -> PipelineConfig:
    overrides = {SWEEP_PARAMETERS[name]: value for name, value in settings}
    try:
        return config.with_overrides(**overrides)
    except ValidationError as e:
        raise ConfigurationError(f"invalid sweep setting {dict(settings)}: {e}") from e


async def sweep(
    config: PipelineConfig,
    parameter: str,
    values: Sequence[Any],
    dataset: Sequence[SkeletonSequence],
    second_parameter: Optional[str] = None,
    second_values: Optional[Sequence[Any]] = None,
    save_bundles: bool = False,
) -> SweepResult:
    """
    Evaluate the configured protocol once per value (or value pair).

    A failing cell is recorded with its error instead of stopping the sweep.
    """
    for name in filter(None, (parameter, second_parameter)):
        if name not in SWEEP_PARAMETERS:
            raise ConfigurationError(f"unknown sweep parameter {name!r}; expected one of {sorted(SWEEP_PARAMETERS)}")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if second_parameter is not None and not second_values:
        raise ConfigurationError(f"sweep over {second_parameter} needs at least one value")

    grid = [[(parameter, v)] for v in values]
    if second_parameter is not None:
        grid = [[(parameter, v), (second_parameter, w)] for v in values for w in second_values]

    rows = []
    for settings in grid:
        label = ", ".join(f"{name}={format_value(v)}" for name, v in settings)
        row = {name: format_value(v) for name, v in settings}
        logger.info("=" * 80)
        logger.info(f"SWEEP CELL: {label}")
        logger.info("=" * 80)
        try:
            cell_config = _cell_config(config, settings)
            run_name = "sweep_" + "_".join(f"{name}-{format_value(v)}" for name, v in settings)
            outcome = await evaluate_protocol(dataset, ProtocolSpec.from_config(cell_config), cell_config,
                                              run_name=run_name, save_bundles=save_bundles)
            row.update(accuracy=round(outcome.mean_accuracy, 4), status="ok")
        except TrajectoryletError as e:
            logger.error(f"❌ Sweep cell {label} failed: {e}")
            row.update(accuracy=float("nan"), status=f"failed: {e}")
        rows.append(row)

    return SweepResult(parameter, pd.DataFrame(rows), second_parameter)
