"""Robust predictive runtime verification for STL specifications under distribution shift."""

from . import conformal, predictors, rprv, shift, stl
from .conformal import (
    FDivergenceSpec,
    PredictionRegion,
    ScoreSet,
    empirical_quantile,
    g_func,
    g_inverse,
    min_calibration_size,
    robust_quantile,
)
from .predictors import fit_predictor
from .rprv import (
    VerificationOutcome,
    adaptive_direct_verify,
    direct_verify,
    variant1_verify,
    variant2_verify,
)
from .shift import estimate_epsilon, tv_estimate
from .stl import eval_boolean, eval_robustness, parse_formula

__version__ = "0.1.0"
