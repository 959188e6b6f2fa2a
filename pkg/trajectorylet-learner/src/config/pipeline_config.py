"""Pipeline configuration: dataset presets, validated settings and concurrency limits"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.datasets import list_datasets, topology_for_dataset

COMPONENTS = ("x0", "x1", "x2", "x3")
DEFAULT_CV_GRID = [2.0 ** k for k in range(-5, 6)]

# Parameter names used by sweeps -> PipelineConfig field
SWEEP_PARAMETERS = {
    "K": "n_clusters",
    "M_A": "per_instance_budget",
    "N_A": "n_top",
    "L": "trajectorylet_length",
    "pyramid_levels": "pyramid_levels",
    "components": "components",
}

# Dataset presets (defaults per dataset; config file, env and CLI override these)
DATASET_PRESETS: Dict[str, Dict[str, Any]] = {
    "action3d": {
        "trajectorylet_length": 5,
        "n_top": 50,
        "per_instance_budget": 10,
        "n_clusters": 500,
        "pyramid_levels": 1,
        "pool_size": 10000,
        "description": "MSR Action3D: L=5, N_A=50, M_A=10, K=500, no pyramid",
    },
    "daily_activity": {
        "trajectorylet_length": 5,
        "n_top": 50,
        "per_instance_budget": 15,
        "n_clusters": 500,
        "pyramid_levels": 3,
        "pool_size": 10000,
        "description": "MSR DailyActivity3D: L=5, N_A=50, M_A=15, K=500, 3-level pyramid",
    },
    "synthetic": {
        "trajectorylet_length": 5,
        "n_top": 20,
        "per_instance_budget": 5,
        "n_clusters": 60,
        "pyramid_levels": 1,
        "pool_size": 1200,
        "description": "Desk-scale planted-motif data",
    },
}

# ============================================================================
# Concurrency Control Settings
# ============================================================================
# Maximum parallel executions per node type (None = unlimited).
# The workflow overrides these from PipelineConfig.workers at start.

CONCURRENCY_LIMITS: Dict[str, Optional[int]] = {
    "mining": 4,
    "encoding": None,
}

# Global default for node types not listed above
DEFAULT_CONCURRENCY_LIMIT = 4


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.replace(";", ",").split(",") if item.strip()]
    return value


class PipelineConfig(BaseModel):
    """
    Every knob of the learning pipeline in one flat, validated model.

    Flat keys keep the config file, environment overrides and CLI flags in
    one namespace; sub-configs are exposed as derived views.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Data
    dataset: str = Field("action3d", description="Preset / registry dataset id")
    data_dir: Optional[str] = Field(None, description="Directory of skeleton files")
    data_format: Literal["canonical", "msr_skeleton"] = "canonical"
    coordinates: Literal["real_world", "screen"] = "real_world"
    topology: Optional[str] = Field(None, description="Joint topology preset for MSR files")
    exclusion_list: Optional[str] = Field(None, description="File of instance ids to drop")

    # Protocol
    protocol: Literal["cross_subject_all", "as_subsets", "custom_split"] = "cross_subject_all"
    train_subjects: List[int] = Field(default_factory=list)
    test_subjects: List[int] = Field(default_factory=list)
    classes: List[int] = Field(default_factory=list, description="Restrict to these classes (empty = all)")

    # Trajectorylet
    trajectorylet_length: int = Field(5, ge=2, description="L")
    components: List[Literal["x0", "x1", "x2", "x3"]] = Field(default_factory=lambda: ["x0", "x1", "x2"])
    pca_retain_fraction: float = Field(0.5, gt=0.0, le=1.0)

    # ESVM
    lambda_pos: float = Field(10.0, description="lambda_1, positive exemplar loss weight")
    lambda_neg: float = Field(0.01, description="lambda_2, per-negative loss weight")
    esvm_max_iterations: int = Field(20000, ge=1)
    esvm_tolerance: float = Field(1e-4, gt=0.0)
    gram_cache_limit: int = Field(4000, ge=0, description="Precompute the pool Gram matrix up to this pool size")

    # Mining
    pool_size: int = Field(10000, ge=1, description="N")
    n_top: int = Field(50, ge=1, description="N_A")
    per_instance_budget: int = Field(10, ge=1, description="M_A")

    # Clustering / encoding
    n_clusters: int = Field(500, ge=1, description="K")
    pyramid_levels: int = Field(1, ge=1)

    # One-vs-all classifier
    cv_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_CV_GRID))
    cv_folds: int = Field(5, ge=2)
    svm_max_iterations: int = Field(100000, ge=1)
    svm_tolerance: float = Field(1e-4, gt=0.0)

    # Seeds
    pool_seed: int = 0
    cluster_seed: int = 0
    cv_seed: int = 0

    # Runtime
    workers: int = Field(4, ge=1)
    output_dir: str = "workspace"
    log_level: str = "INFO"

    @field_validator("components", "train_subjects", "test_subjects", "classes", "cv_grid", mode="before")
    @classmethod
    def _parse_lists(cls, value):
        return _split_list(value)

    @field_validator("components")
    @classmethod
    def _order_components(cls, value):
        if not value:
            raise ValueError("components must be nonempty")
        return [c for c in COMPONENTS if c in set(value)]

    @field_validator("cv_grid")
    @classmethod
    def _check_grid(cls, value):
        if not value or any(c <= 0 for c in value):
            raise ValueError("cv_grid must be a nonempty list of positive values")
        return sorted(set(float(c) for c in value))

    @field_validator("dataset")
    @classmethod
    def _known_dataset(cls, value):
        if value not in list_datasets():
            raise ValueError(f"unknown dataset {value!r}; expected one of {list_datasets()}")
        return value

    @model_validator(mode="after")
    def _check_invariants(self):
        if not self.lambda_pos > self.lambda_neg > 0:
            raise ValueError("ESVM weights must satisfy lambda_pos > lambda_neg > 0")
        if "x2" in self.components and self.trajectorylet_length < 3:
            raise ValueError("component x2 needs trajectorylet_length >= 3")
        if "x3" in self.components and self.trajectorylet_length < 4:
            raise ValueError("component x3 needs trajectorylet_length >= 4")
        if set(self.train_subjects) & set(self.test_subjects):
            raise ValueError("train_subjects and test_subjects must be disjoint")
        return self

    # ------------------------------------------------------------------
    # Derived views
    # ------------------------------------------------------------------

    def resolved_topology(self) -> str:
        return self.topology or topology_for_dataset(self.dataset) or "msr_action3d"

    def trajectorylet_config(self):
        from src.features.trajectorylet import TrajectoryletConfig
        return TrajectoryletConfig(
            length=self.trajectorylet_length,
            components=tuple(self.components),
            pca_retain_fraction=self.pca_retain_fraction,
        )

    def esvm_params(self):
        from src.learning.linear_svm import EsvmParams
        return EsvmParams(
            lambda_pos=self.lambda_pos,
            lambda_neg=self.lambda_neg,
            max_iterations=self.esvm_max_iterations,
            convergence_tolerance=self.esvm_tolerance,
        )

    def mining_params(self):
        from src.learning.detector_mining import MiningParams
        return MiningParams(n_top=self.n_top, per_instance_budget=self.per_instance_budget)

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        data = self.model_dump()
        data.update(overrides)
        return PipelineConfig(**data)

    def to_text(self) -> str:
        """Flat key=value echo, sorted by key."""
        lines = []
        for key, value in sorted(self.model_dump().items()):
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def get_preset(dataset: str) -> Dict[str, Any]:
    """Preset overrides for a dataset (without the description)."""
    preset = dict(DATASET_PRESETS.get(dataset, {}))
    preset.pop("description", None)
    return preset


def create_config(dataset: str = "action3d", **overrides: Any) -> PipelineConfig:
    """Preset defaults for `dataset` with explicit overrides on top."""
    values: Dict[str, Any] = {"dataset": dataset}
    values.update(get_preset(dataset))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
