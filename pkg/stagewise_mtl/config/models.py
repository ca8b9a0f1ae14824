from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt,
                      field_validator, model_validator)
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    LOGS_PATH: str = './artifacts/logs'
    MLFLOW_TRACKING_URI: Optional[str] = None
    EIGEN_SUPPORT_CAP: PositiveInt = 1_000_000
    model_config = SettingsConfigDict(env_prefix='STAGEWISE_MTL_', env_file='.env', extra='ignore')


class RayConfig(BaseModel):
    address: Optional[str] = None
    num_cpus: Optional[PositiveInt] = None

    @field_validator('address', mode='before')
    @classmethod
    def convert_localhost(cls, v: Optional[str]):
        if v:
            v_striped = v.strip()
            return None if v_striped == 'localhost' else v_striped
        return v
    model_config = ConfigDict(extra='forbid')


class SolverConfig(BaseModel):
    """Inner proximal-gradient solver settings."""
    max_iterations: PositiveInt = 10_000
    rel_tolerance: PositiveFloat = 1e-8
    # None means 1/L from the power-iteration estimate
    step_size: Optional[PositiveFloat] = None
    backtracking: bool = True
    backtracking_factor: float = Field(0.5, gt=0.0, lt=1.0)
    restart: bool = True
    model_config = ConfigDict(extra='forbid', frozen=True)


class MultiStageConfig(BaseModel):
    lam: PositiveFloat
    theta: PositiveFloat
    stages: PositiveInt = 10
    inner: SolverConfig = SolverConfig()
    stage_stop_tol: NonNegativeFloat = 1e-10
    parallel_tasks: bool = False
    model_config = ConfigDict(extra='forbid', frozen=True)


class SyntheticSpec(BaseModel):
    m: PositiveInt
    n: PositiveInt
    d: PositiveInt
    sigma: NonNegativeFloat = 0.01
    zero_row_fraction: float = Field(0.9, ge=0.0, le=1.0)
    within_row_zero_fraction: float = Field(0.8, ge=0.0, le=1.0)
    coef_low: float = -10.0
    coef_high: float = 10.0
    column_norm: Literal['unit', 'sqrt_n'] = 'unit'
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @model_validator(mode='after')
    def check_coefficient_range(self):
        if not self.coef_low < self.coef_high:
            raise ValueError(f'coef_low ({self.coef_low}) must be smaller than coef_high ({self.coef_high})')
        return self
    model_config = ConfigDict(extra='forbid', frozen=True)


class Preset(Enum):
    TINY = 'tiny'
    SMALL = 'small'
    WELLPOSED = 'wellposed'


PRESETS = {
    Preset.TINY: SyntheticSpec(m=3, d=20, n=15, sigma=0.005),
    Preset.SMALL: SyntheticSpec(m=10, d=100, n=30, sigma=0.01),
    Preset.WELLPOSED: SyntheticSpec(m=2, d=10, n=400, sigma=0.01, within_row_zero_fraction=0.0,
                                    column_norm='sqrt_n'),
}


class Algorithm(Enum):
    MULTISTAGE = 'multistage'
    LASSO = 'lasso'
    L12 = 'l12'
    DIRTY = 'dirty'


class ExperimentKind(Enum):
    ERROR_VS_STAGE = 'error-vs-stage'
    ERROR_VS_LAMBDA = 'error-vs-lambda'
    REAL_DATA_CV = 'real-data-cv'
    DIAGNOSE = 'diagnose'


class ExperimentConfig(BaseModel):
    """
    Everything one harness run needs. All keys can be given in a flat YAML/JSON file
    and overridden from the command line.
    """
    name: str = 'stagewise'
    kind: ExperimentKind = ExperimentKind.ERROR_VS_STAGE
    algorithms: List[Algorithm] = list(Algorithm)
    # lambda = alpha * sqrt(ln(d m) / n)
    alphas: List[PositiveFloat] = [0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2]
    # theta / lambda, expressed as multiples of m
    theta_ratios: List[PositiveFloat] = [50.0, 10.0, 2.0, 0.4]
    # lambda_s / lambda_b
    dirty_ratios: List[PositiveFloat] = [1.0, 0.5, 0.2, 0.1]
    preset: Optional[Preset] = None
    synthetic: Optional[SyntheticSpec] = None
    csv_path: Optional[Path] = None
    seeds: List[int] = list(range(10))
    train_ratios: List[float] = [0.15, 0.2, 0.25]
    folds: int = Field(3, ge=2)
    stages: PositiveInt = 10
    stage_stop_tol: NonNegativeFloat = 1e-10
    solver: SolverConfig = SolverConfig()
    eta: float = Field(0.05, gt=0.0, lt=1.0)
    sparsity_level: Optional[PositiveInt] = None
    output: Path = Path('results.csv')
    parallel: bool = False
    ray_config: Optional[RayConfig] = None
    track: bool = False

    @field_validator('algorithms', 'alphas', 'theta_ratios', 'dirty_ratios', 'seeds', 'train_ratios')
    @classmethod
    def check_not_empty(cls, value: list):
        if not value:
            raise ValueError('must not be empty')
        return value

    @field_validator('train_ratios')
    @classmethod
    def check_ratios(cls, value: List[float]):
        for ratio in value:
            if not 0.0 < ratio < 1.0:
                raise ValueError(f'training ratios must lie in (0, 1), got {ratio}')
        return value

    @model_validator(mode='after')
    def resolve_preset(self):
        if self.synthetic is None and self.preset is not None:
            self.synthetic = PRESETS[self.preset]
        return self

    def synthetic_for_seed(self, seed: int) -> SyntheticSpec:
        if self.synthetic is None:
            raise ValueError('A synthetic spec or a preset is required for synthetic experiments')
        return self.synthetic.model_copy(update={'seed': seed})

    model_config = ConfigDict(extra='forbid')
