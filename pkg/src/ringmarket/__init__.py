"""Evolutionary boom-bust market on a ring of sellers and buyers."""

__version__ = "0.1.0"

from .analysis import (Histogram, PeriodDistribution, TimeSeries, ensemble_stats,
                       moving_average, period_lengths, price_histogram)
from .lineage import ancestor_census, classify_decay, franchise_table
from .market import (MarketState, StepMetrics, Trajectory, advance, init_state,
                     run_timestep)
from .params import ModelParams, OverheadPool, ParamError, PricePolicy, Scheme
from .rng import derive_seed
from .variants import discrete_timestep

__all__ = [
    "Histogram", "MarketState", "ModelParams", "OverheadPool", "ParamError",
    "PeriodDistribution", "PricePolicy", "Scheme", "StepMetrics", "TimeSeries",
    "Trajectory", "advance", "ancestor_census", "classify_decay", "derive_seed",
    "discrete_timestep", "ensemble_stats", "franchise_table", "init_state",
    "moving_average", "period_lengths", "price_histogram", "run_timestep",
]
