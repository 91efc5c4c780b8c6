from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Condition(str, Enum):
    INDV = "INDV"
    SIMUL = "SIMUL"


class ModelKind(str, Enum):
    CIM = "CIM"
    CDM = "CDM"
    ImpCIM = "ImpCIM"
    ImpCDM = "ImpCDM"

    @property
    def has_impression(self) -> bool:
        """Mean goes through the per-(target, worker) impression mu."""
        return self in (ModelKind.ImpCIM, ModelKind.ImpCDM)

    @property
    def shared_variance(self) -> bool:
        """Variances r, w do not depend on the criterion."""
        return self in (ModelKind.CDM, ModelKind.ImpCDM)


class HyperParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_prior_mean: float = 3.0
    t_prior_var: float = Field(1.0, gt=0)
    offset_prior_var: float = Field(1.0, gt=0)  # q, b, c
    gamma_shape: float = Field(2.0, gt=0)
    gamma_rate: float = Field(2.0, gt=0)
    mu_var: float = Field(1.0, gt=0)


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.01, gt=0)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    max_steps: int = Field(5000, gt=0)
    convergence_tol: float = Field(1e-6, ge=0)  # absolute change of the objective over the window
    restarts: int = Field(20, gt=0)


class TruthOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: Optional[List[float]] = None
    q: Optional[List[List[float]]] = None
    b: Optional[List[float]] = None
    c: Optional[List[float]] = None


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    I: int = Field(20, ge=1)
    J: int = Field(30, ge=1)
    M: int = Field(5, ge=1)
    kind: ModelKind = ModelKind.ImpCDM
    seed: int = Field(0, ge=0, lt=2**64)
    truth_overrides: Optional[TruthOverrides] = None
    impression_strength: float = Field(1.0, ge=0)  # variance of mu around t_i + b_j
    discretize: bool = True
    criteria: Optional[List[str]] = None
    paired: bool = False

    @model_validator(mode="after")
    def _check_shapes(self) -> "SynthConfig":
        if self.criteria is not None:
            if len(self.criteria) != self.M:
                raise ValueError(f"criteria has {len(self.criteria)} names, M={self.M}")
            if len(set(self.criteria)) != len(self.criteria):
                raise ValueError("criteria names must be unique")
            if any("," in name or not name for name in self.criteria):
                raise ValueError("criteria names must be non-empty and comma-free")
        o = self.truth_overrides
        if o is not None:
            if o.t is not None and len(o.t) != self.I:
                raise ValueError("truth_overrides.t must have length I")
            if o.b is not None and len(o.b) != self.J:
                raise ValueError("truth_overrides.b must have length J")
            if o.c is not None and len(o.c) != self.M:
                raise ValueError("truth_overrides.c must have length M")
            if o.q is not None and (len(o.q) != self.I or any(len(row) != self.M for row in o.q)):
                raise ValueError("truth_overrides.q must be I x M")
        return self


class DataPaths(BaseModel):
    model_config = ConfigDict(extra="forbid")

    indv: Optional[Path] = None
    simul: Optional[Path] = None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data: Optional[DataPaths] = None
    synth: Optional[SynthConfig] = None
    models: List[ModelKind] = Field(default_factory=lambda: list(ModelKind))
    n_workers_range: List[int] = Field(default_factory=lambda: [5, 6, 7, 8, 9, 10])
    trials: int = Field(20, ge=1)
    base_seed: int = Field(0, ge=0, lt=2**64)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    hyper: HyperParams = Field(default_factory=HyperParams)
    potential_truth_mode: Literal["pooled_mean", "overall_criterion"] = "pooled_mean"
    overall_criterion: str = "overall"
    metric: Literal["spearman", "pearson", "kendall"] = "spearman"
    criteria_order: Optional[List[str]] = None
    alpha: float = Field(0.01, gt=0, lt=1)

    @field_validator("n_workers_range")
    @classmethod
    def _positive_counts(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("n_workers_range values must be >= 1")
        return v

    @field_validator("models")
    @classmethod
    def _non_empty_models(cls, v: List[ModelKind]) -> List[ModelKind]:
        if not v:
            raise ValueError("at least one model is required")
        return v


# Reports

class ReportMetadata(BaseModel):
    started_at: float
    finished_at: Optional[float] = None
    version: str


class TestName(str, Enum):
    FTwoSided = "FTwoSided"
    WelchT = "WelchT"
    BrunnerMunzel = "BrunnerMunzel"


class TestResult(BaseModel):
    __test__ = False  # not a pytest class

    test: TestName
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    df: Union[float, Tuple[float, float]]
    effect: Optional[float] = None  # Brunner-Munzel relative effect
    degenerate: bool = False


class MomentRecord(BaseModel):
    grouping: Literal["inter_criteria", "inter_target"]
    group_key: Tuple[str, str]
    n: int = Field(ge=2)
    mean: float
    variance: float = Field(ge=0.0)


class MomentSummary(BaseModel):
    count: int
    mean_of_means: Optional[float] = None
    sd_of_means: Optional[float] = None
    mean_of_variances: Optional[float] = None
    sd_of_variances: Optional[float] = None


class GroupingReport(BaseModel):
    grouping: Literal["inter_criteria", "inter_target"]
    indv: MomentSummary
    simul: MomentSummary


class TestOutcome(BaseModel):
    __test__ = False

    grouping: Literal["inter_criteria", "inter_target"]
    distribution: Literal["mean", "variance"]
    test: TestName
    result: Optional[TestResult] = None
    significant: Optional[bool] = None
    error: Optional[str] = None


class StatReport(BaseModel):
    alpha: float
    grade_distribution: Dict[str, List[float]]
    moments: List[GroupingReport]
    tests: List[TestOutcome]
    distributions: Dict[str, Dict[str, Dict[str, List[float]]]]  # grouping -> condition -> means/variances
    metadata: ReportMetadata


class TrialRecord(BaseModel):
    trial: int
    seed: int
    values: Dict[str, Optional[float]] = Field(default_factory=dict)
    objective: Optional[float] = None
    converged: Optional[bool] = None
    steps: Optional[int] = None
    error: Optional[str] = None


class CellReport(BaseModel):
    model: ModelKind
    n_workers: int
    means: Dict[str, Optional[float]]
    trials: List[TrialRecord]
    excluded: int = 0


class ExperimentReport(BaseModel):
    metric: str
    columns: List[str]
    cells: List[CellReport]
    winners: Dict[str, Dict[str, ModelKind]]  # n_workers -> column -> best model
    metadata: ReportMetadata
