from datetime import datetime
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from . import config

DEFAULT_ORDERS = [11, 17, 23, 31]
FULL_GRID_ORDERS = [11, 17, 23, 31, 41, 53, 71, 97, 127]
DEFAULT_RATIOS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


# Experiment configuration
class GroupRecipe(BaseModel):
    """How to obtain the group (and its irrep catalog)"""
    kind: Literal["cyclic", "product", "dihedral", "file"] = Field("cyclic", description="Group family")
    order: Optional[int] = Field(None, ge=1, description="Order M of a cyclic group")
    factors: list[int] = Field(default_factory=list, description="Cyclic orders of a product group")
    n: Optional[int] = Field(None, ge=3, description="Dihedral parameter (group order 2n)")
    path: Optional[str] = Field(None, description="Cayley-table file for kind=file")
    catalog: Optional[str] = Field(None, description="Irrep sidecar JSON for an imported table")

    class Config:
        extra = "forbid"

    @field_validator("factors")
    @classmethod
    def factors_positive(cls, v: list[int]) -> list[int]:
        if any(m < 1 for m in v):
            raise ValueError("product factors must be positive")
        return v

    @model_validator(mode="after")
    def required_fields_present(self) -> "GroupRecipe":
        if self.kind == "cyclic" and self.order is None:
            raise ValueError("cyclic recipe needs 'order'")
        if self.kind == "product" and not self.factors:
            raise ValueError("product recipe needs a non-empty 'factors' list")
        if self.kind == "dihedral" and self.n is None:
            raise ValueError("dihedral recipe needs 'n'")
        if self.kind == "file":
            if not self.path:
                raise ValueError("file recipe needs 'path'")
            if not Path(self.path).is_file():
                raise ValueError(f"Cayley-table file not found: {self.path}")
        if self.catalog and not Path(self.catalog).is_file():
            raise ValueError(f"irrep sidecar not found: {self.catalog}")
        return self

    def label(self) -> str:
        if self.kind == "cyclic":
            return f"cyclic {self.order}"
        if self.kind == "product":
            return "product " + " ".join(str(m) for m in self.factors)
        if self.kind == "dihedral":
            return f"dihedral {self.n}"
        return f"file {self.path}"

    def with_size(self, size: int) -> "GroupRecipe":
        """Same family with its scanned size replaced: cyclic order, dihedral n, or the last product factor"""
        if self.kind == "cyclic":
            return GroupRecipe.model_validate({**self.model_dump(), "order": size})
        if self.kind == "dihedral":
            return GroupRecipe.model_validate({**self.model_dump(), "n": size})
        if self.kind == "product":
            return GroupRecipe.model_validate({**self.model_dump(), "factors": [*self.factors[:-1], size]})
        raise ValueError("an imported Cayley table has a fixed order and cannot be scanned")


class TaskSpec(BaseModel):
    p: float = Field(0.4, gt=0, le=1, description="Training fraction n / M²")
    split_seed: int = Field(0, description="Seed of the train/test split")
    mode: Literal["fixed-count", "bernoulli"] = Field("fixed-count", description="Split mode")
    centering: Literal["exact-projection", "train-statistics"] = Field("exact-projection")

    class Config:
        extra = "forbid"


class ModelSpec(BaseModel):
    K: int = Field(2048, ge=1, description="Hidden width")
    depth: int = Field(2, ge=2, description="Number of weight layers including the output layer")
    activation: Literal["quadratic", "linear_quadratic", "relu", "silu", "tanh", "sigmoid", "linear"] = "quadratic"
    act_a: float = Field(1.0, description="Linear coefficient of linear_quadratic")
    act_b: float = Field(1.0, description="Quadratic coefficient of linear_quadratic")
    residual: bool = Field(False, description="Residual connections between K×K layers")
    init_scale: float = Field(1.0, gt=0, description="Multiplier on the 1/sqrt(fan-in) init std")

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def residual_needs_depth(self) -> "ModelSpec":
        if self.residual and self.depth <= 2:
            raise ValueError("residual connections need depth > 2")
        return self


class TrainConfig(BaseModel):
    """Full-batch optimizer settings"""
    lr: float = Field(1e-3, gt=0, description="Learning rate")
    weight_decay: float = Field(2e-4, ge=0, description="Weight decay η")
    decay: Literal["decoupled", "l2"] = Field(
        "decoupled", description="How adam and muon apply η: shrink the weights, or add η·W to the gradient"
    )
    optimizer: Literal["gd", "adam", "muon"] = Field("adam", description="muon = Muon on hidden layers, Adam on V")
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    muon_momentum: float = Field(0.95, ge=0, lt=1)
    nesterov: bool = True
    epochs: Optional[int] = Field(None, ge=1, description="Optimizer steps; default depends on M")
    eval_every: int = Field(100, ge=1, description="Telemetry cadence in steps")
    seed: int = Field(0, description="Initialization seed")
    threshold: float = Field(0.99, gt=0, le=1, description="Accuracy counted as generalized")

    class Config:
        extra = "forbid"

    def budget(self, M: int) -> int:
        if self.epochs is not None:
            return self.epochs
        return 20_000 if M <= 31 else 50_000


class ScanSpec(BaseModel):
    orders: list[int] = Field(
        default_factory=lambda: list(DEFAULT_ORDERS),
        description="Size per cell: cyclic order, dihedral n, or the last product factor",
    )
    ratios: list[float] = Field(default_factory=lambda: list(DEFAULT_RATIOS))
    seeds: list[int] = Field(default_factory=lambda: list(range(5)))
    learning_rates: list[float] = Field(default_factory=list, description="Optional lr dimension")
    full_grid: bool = Field(False, description="Orders up to 127 with 20 seeds")

    class Config:
        extra = "forbid"

    @field_validator("orders", "ratios", "seeds")
    @classmethod
    def grid_not_empty(cls, v: list) -> list:
        if not v:
            raise ValueError("scan grids must be non-empty")
        return v

    @field_validator("ratios")
    @classmethod
    def ratios_in_range(cls, v: list[float]) -> list[float]:
        if any(not 0 < p <= 1 for p in v):
            raise ValueError("ratios must lie in (0, 1]")
        return sorted(v)

    @field_validator("learning_rates")
    @classmethod
    def lrs_positive(cls, v: list[float]) -> list[float]:
        if any(lr <= 0 for lr in v):
            raise ValueError("learning rates must be positive")
        return v

    def grid(self) -> tuple[list[int], list[int]]:
        if self.full_grid:
            return list(FULL_GRID_ORDERS), list(range(20))
        return self.orders, self.seeds


class SingleTargetSpec(BaseModel):
    target: int = Field(0, ge=0)
    weights: list[float] = Field(..., description="p_g per element, normalized internally")


class AscentSpec(BaseModel):
    seeds: int = Field(64, ge=1, description="Number of random starts")
    lr: float = Field(0.1, gt=0)
    max_steps: int = Field(5000, ge=1)
    tol: float = Field(1e-8, gt=0)
    suppressed: list[int] = Field(default_factory=list, description="Irrep ids S of the modulated energy")
    single_target: Optional[SingleTargetSpec] = None
    flatness: bool = Field(True, description="Compute the projected-Hessian extremes")

    class Config:
        extra = "forbid"


class VerifySpec(BaseModel):
    suite: str = "all"
    slow: bool = Field(False, description="Include slow (training-based) checks")
    seed: int = 0

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    """Everything a subcommand needs; loaded from --config and --set"""
    group: GroupRecipe = Field(default_factory=lambda: GroupRecipe(kind="cyclic", order=71))
    task: TaskSpec = Field(default_factory=TaskSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    scan: ScanSpec = Field(default_factory=ScanSpec)
    ascent: AscentSpec = Field(default_factory=AscentSpec)
    verify: VerifySpec = Field(default_factory=VerifySpec)
    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)
    tag: str = Field("run", min_length=1, max_length=80)
    workers: int = Field(default_factory=lambda: config.WORKERS, ge=1)

    class Config:
        extra = "forbid"

    @field_validator("tag")
    @classmethod
    def tag_is_path_safe(cls, v: str) -> str:
        v = v.strip()
        if not v or any(c in v for c in "/\\ "):
            raise ValueError("tag must be a non-empty path-safe word")
        return v


# Library-level configs
class AscentConfig(BaseModel):
    lr: float = Field(0.1, gt=0)
    max_steps: int = Field(5000, ge=1)
    tol: float = Field(1e-8, gt=0)
    max_halvings: int = Field(30, ge=0)


class CouponConfig(BaseModel):
    """Mode-collection simulation parameters"""
    mu: list[float] = Field(..., min_length=1, description="Rates μ_l in (0, 1]")
    a: float = Field(4.0, gt=1, description="Fréchet shape")
    trials: int = Field(5000, ge=100)
    mode: Literal["independent", "muon"] = "independent"
    suppression: float = Field(0.5, gt=0, le=1)
    seed: int = 0

    @field_validator("mu")
    @classmethod
    def mu_in_unit_interval(cls, v: list[float]) -> list[float]:
        if any(not 0 < m <= 1 for m in v):
            raise ValueError("every μ must lie in (0, 1]")
        return v

    @property
    def L(self) -> int:
        return len(self.mu)


# Reports and run records
class VerifyReport(BaseModel):
    check: str
    params: dict[str, Any] = Field(default_factory=dict)
    passed: bool = Field(..., alias="pass")
    gating: bool = True
    stats: dict[str, Any] = Field(default_factory=dict)
    tolerances: dict[str, float] = Field(default_factory=dict)
    seed: Optional[int] = None
    seconds: float = 0.0

    class Config:
        populate_by_name = True

    def dump(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)


class DatasetManifest(BaseModel):
    source: str = Field(..., description="Recipe label or content hash of the Cayley table")
    p: float
    seed: int
    mode: Literal["fixed-count", "bernoulli"]
    train: list[int]
    test: list[int]


class RunManifest(BaseModel):
    created: datetime
    version: str
    config: dict[str, Any]
    seeds: dict[str, int]
    input_hash: str
    dataset: Optional[DatasetManifest] = None


class RunSummary(BaseModel):
    epochs_run: int
    final_train_acc: float
    final_test_acc: float
    first_train_epoch: int = Field(-1, description="-1 when never reached")
    first_test_epoch: int = Field(-1, description="-1 when never reached")
    grokking_delay: int = Field(-1, description="-1 when either threshold was never reached")
    diverged_epoch: Optional[int] = None
    min_muon_inner: Optional[float] = None
