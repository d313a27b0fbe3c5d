"""Exact verification tools for moment inequalities of sums of two independent variables."""

from .constants import BoundsReport, Extremum, Regime, VarClass, psi, psi_extremum, sharp_bounds
from .decompose import decompose_centered, decompose_symmetric, recompose
from .distributions import (
    FiniteDistribution,
    abs_moment,
    convolve,
    expectation,
    make_two_point_centered,
    make_two_point_symmetric,
    mean,
)
from .functions import FunctionSpec
from .verifier import fuzz_inequality, gap, ratio_extremize

__version__ = "0.1.0"
