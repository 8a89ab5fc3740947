"""Screening electricity markets for capacity withholding and push-in."""

from .errors import (
    AlignmentError,
    ConfigError,
    DomainError,
    InfeasibleError,
    MarketPowerError,
    ParseError,
    SchemaError,
    SeparationError,
    ShapeError,
    StageError,
    UnitReferenceError,
    ValidationError,
)
from .kernels import BACKEND
from .market_data import MarketSeries, ObservedGeneration, OutageMask, UnitSpec
from .monte_carlo import McConfig
from .supply_curve import SlopeParams
from .fuels import FuelParams
from .econometrics import LogitFit, fit_logit, predict_prob
from .pipeline import PipelineConfig, load_config, run_pipeline, run_stages
from .synthetic import SynthConfig, generate_market

__version__ = "0.1.0"
