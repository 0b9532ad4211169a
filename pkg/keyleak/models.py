"""
KeyLeak Data Models

Serializable records shared by the bound evaluators, the oracle, the report
pipeline and the CLI.
"""
import math
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator


# Formulas known to be wrong; kept only for comparison columns
FLAGGABLE_FORMULAS = frozenset({"per_bit_fallacy", "ber_fallacy"})

# Slack below this counts as a violation
SLACK_TOLERANCE = 1e-12


class BoundFlag(str, Enum):
    VALID = "valid"
    FLAGGED_INCORRECT = "flagged-incorrect"


class BoundResult(BaseModel):
    """Output of every closed-form bound evaluator"""

    formula: str
    value: float
    log2_value: Optional[float] = None
    inputs: Dict[str, Any] = Field(default_factory=dict)
    flag: BoundFlag = BoundFlag.VALID
    clamped: bool = False
    feasible: bool = True
    details: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_flag(self):
        if self.flag == BoundFlag.FLAGGED_INCORRECT and self.formula not in FLAGGABLE_FORMULAS:
            raise ValueError(f"formula '{self.formula}' cannot carry the incorrect flag")
        if self.flag == BoundFlag.VALID and self.formula in FLAGGABLE_FORMULAS:
            raise ValueError(f"formula '{self.formula}' must carry the incorrect flag")
        if math.isnan(self.value):
            raise ValueError("bound value is NaN")
        return self

    @property
    def is_flagged(self) -> bool:
        return self.flag == BoundFlag.FLAGGED_INCORRECT

    @property
    def exact(self) -> Optional[Fraction]:
        """Exact value when the inputs were exact"""
        text = self.details.get("exact_value")
        return None if text is None else Fraction(text)


class Violation(BaseModel):
    instance: str
    bound_value: float
    true_value: float


class VerificationReport(BaseModel):
    """Outcome of one soundness or refutation sweep"""

    bound_name: str
    kind: Literal["soundness", "refutation"] = "soundness"
    flagged: bool = False
    instances_checked: int = 0
    min_slack: Optional[float] = None
    max_slack: Optional[float] = None
    violation_count: int = 0
    violations: List[Violation] = Field(default_factory=list)
    seed: int = 0
    complete: bool = True

    @model_validator(mode="after")
    def _check_slack(self):
        if self.violation_count == 0 and self.max_slack is not None and self.max_slack < -SLACK_TOLERANCE:
            raise ValueError("no violations recorded but max_slack is negative")
        return self

    @property
    def failed(self) -> bool:
        """A soundness sweep of a non-flagged bound found a violation"""
        return self.kind == "soundness" and not self.flagged and self.violation_count > 0

    @property
    def refuted(self) -> bool:
        return self.kind == "refutation" and self.violation_count > 0


class LeakModel(str, Enum):
    AVERAGE = "average"
    INDIVIDUAL = "individual"
    KPA_INDIVIDUAL = "kpa-individual"
    PER_BIT_FALLACY = "per-bit-fallacy"
    UNIFORM_BASELINE = "uniform-baseline"
    SYMMETRIC_CIPHER_BASELINE = "symmetric-cipher-baseline"


class ProtocolParams(BaseModel):
    """One protocol round's parameters"""

    name: str = "default"
    block_len: int = Field(default=100_000, ge=1)
    d_level: float = 1e-9
    key_rate: float = 1e7
    sifted_len: int = Field(default=100_000, ge=1)
    key_len: Optional[int] = Field(default=None, ge=1)
    qber: float = 0.0
    ecc_factor: float = 1.0
    tag_space: int = Field(default=2 ** 32, ge=2)
    seed_key_bits: int = Field(default=128, ge=1)
    guarantee_constants: Literal["bound", "leading-order"] = "bound"

    @field_validator("d_level")
    @classmethod
    def _d_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"d_level must lie in [0, 1], got {value}")
        return value

    @field_validator("qber")
    @classmethod
    def _qber_range(cls, value: float) -> float:
        if not 0.0 <= value < 0.5:
            raise ValueError(f"qber must lie in [0, 0.5), got {value}")
        return value

    @field_validator("ecc_factor")
    @classmethod
    def _f_range(cls, value: float) -> float:
        if not 1.0 <= value <= 2.0:
            raise ValueError(f"ecc_factor must lie in [1, 2], got {value}")
        return value

    @field_validator("key_rate")
    @classmethod
    def _rate_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError(f"key_rate must be positive, got {value}")
        return value

    @property
    def leading_order(self) -> bool:
        return self.guarantee_constants == "leading-order"

    @property
    def effective_key_len(self) -> int:
        return self.key_len if self.key_len is not None else self.sifted_len


class NetKeyRate(BaseModel):
    key_len: int
    leak_bits: float
    net_key_len: float
    key_rate: float
    net_rate: float
    systematic: bool = False
    feasible: bool = True


class LeakProjection(BaseModel):
    """Expected compromise figures for one attack model"""

    model: LeakModel
    params_name: str = "default"
    blocks_per_day: float
    per_block_probability: float
    log2_per_block_probability: Optional[float] = None
    expected_block_leaks_per_day: float
    expected_bit_leaks_per_day: float
    mean_time_to_leak_seconds: Optional[float] = None
    security_bits: Optional[float] = None
    flagged_incorrect: bool = False
    guarantee_constants: str = "bound"
    # Figures are expectations, not probabilities that a leak occurs
    expectation_caveat: bool = True

    @property
    def mean_time_to_leak_days(self) -> Optional[float]:
        if self.mean_time_to_leak_seconds is None:
            return None
        return self.mean_time_to_leak_seconds / 86_400


class RequiredD(BaseModel):
    model: LeakModel
    target_probability: float
    blocks_in_horizon: float
    per_block_target: float
    d: Optional[float] = None
    d_independent: bool = False
    floor_probability: Optional[float] = None
    meets_target: bool = True
    clamped: bool = False


class TableRow(BaseModel):
    params_name: str
    case: str
    model: LeakModel
    per_block_probability: float
    log2_per_block_probability: Optional[float] = None
    expected_block_leaks_per_day: float
    expected_bit_leaks_per_day: float
    mean_time_to_leak_seconds: Optional[float] = None
    security_bits: Optional[float] = None
    flagged_incorrect: bool = False
    expectation_caveat: bool = True
    derived_only: bool = True
    reference_note: Optional[str] = None


class ComparisonTable(BaseModel):
    rows: List[TableRow] = Field(default_factory=list)
    observations: List[str] = Field(default_factory=list)


class StatementFAnalysis(BaseModel):
    per_bit_level: float
    block_len: int
    key_rate: float
    horizon_seconds: float
    d_level: float
    fallacy_per_block: float
    fallacy_log2_per_block: Optional[float] = None
    fallacy_accumulated: float
    per_bit_accumulated: float
    projections: List[LeakProjection] = Field(default_factory=list)
    derived_individual_bits_per_day: float
    derived_kpa_bits_per_second: float
    reference_individual_bits_per_day: float = 1e4
    reference_kpa_bits_per_second: float = 100.0


class BoundCheck(BaseModel):
    """One bound compared against the exact quantity it constrains"""

    name: str
    direction: Literal["upper", "lower"]
    bound_value: Optional[float] = None
    true_value: Optional[float] = None
    slack: Optional[float] = None
    flagged_incorrect: bool = False
    note: Optional[str] = None


class Dossier(BaseModel):
    n: int
    dense: bool
    p1: float
    log2_p1: float
    stat_distance: float
    entropy: float
    information_leak: float
    min_entropy: float
    optimal_ber: Optional[float] = None
    top_profile: List[float] = Field(default_factory=list)
    mixture_feasible_at_delta: Optional[bool] = None
    lhl_near_perfect_length: int = 0
    bounds: List[BoundCheck] = Field(default_factory=list)


ProbabilityLiteral = Union[int, float, str]


class DistributionDocument(BaseModel):
    """On-disk distribution format"""

    n: int = Field(ge=1)
    atoms: List[Tuple[str, ProbabilityLiteral]] = Field(default_factory=list)
    background: Literal["uniform", "zero"] = "uniform"

    @model_validator(mode="after")
    def _check_atoms(self):
        seen = set()
        for bits, _ in self.atoms:
            if len(bits) != self.n or any(c not in "01" for c in bits):
                raise ValueError(f"atom key '{bits}' is not a {self.n}-bit binary string")
            if bits in seen:
                raise ValueError(f"atom key '{bits}' listed twice")
            seen.add(bits)
        return self


class RunConfig(BaseModel):
    """Merged settings, config file and command-line flags for one run"""

    command: str
    inputs: List[str] = Field(default_factory=list)
    output: Optional[str] = None
    seed: int = 0
    exact: bool = True
    workers: int = Field(default=1, ge=1)
    output_format: Literal["json", "csv", "markdown"] = "json"
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "WARNING"
    search_budget: int = Field(default=100_000, ge=0)
    subset_budget: int = Field(default=1 << 20, ge=1)
    sweep_instances: int = Field(default=1000, ge=1)
    sweep_bits: int = Field(default=6, ge=2, le=12)
    params_sets: Dict[str, ProtocolParams] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value):
        return value.upper() if isinstance(value, str) else value


class SimulationResult(BaseModel):
    """Output of the ``simulate`` subcommand for one primitive"""

    target: Literal["otp", "toeplitz", "lfsr", "mac"]
    inputs: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, Any] = Field(default_factory=dict)
