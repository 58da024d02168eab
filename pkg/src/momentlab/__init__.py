"""momentlab: numerical checks of E|X+Y|^r >= E|X-Y|^r for positive-type joint laws."""

__version__ = "0.1.0"

from .counterexample import delta_exact, remark_negative_r, search_two_point, smoothed_delta
from .expr import eval_expr, parse_expr, to_text
from .modelfile import ModelFile, build_model, parse_model_file
from .models import (
    DensityModel,
    DiscreteJoint,
    RExponent,
    TwoPointLaw,
    build_cauchy_density,
    build_cauchy_discrete,
    build_counterexample,
    build_general_discrete,
    build_mixture_density,
    build_product_density,
    build_smoothed,
    truncate_countable,
)
from .moments import MomentEstimate, delta, expectation_xy, moment
from .positivity import PositivityReport, check_psd_discrete, probe_density_positivity
from .representation import TruncationWindow, cr_reciprocal_check, phi_n, truncated_delta

__all__ = [
    "DensityModel", "DiscreteJoint", "ModelFile", "MomentEstimate", "PositivityReport",
    "RExponent", "TruncationWindow", "TwoPointLaw",
    "build_cauchy_density", "build_cauchy_discrete", "build_counterexample",
    "build_general_discrete", "build_mixture_density", "build_model", "build_product_density",
    "build_smoothed", "check_psd_discrete", "cr_reciprocal_check", "delta", "delta_exact",
    "eval_expr", "expectation_xy", "moment", "parse_expr", "parse_model_file", "phi_n",
    "probe_density_positivity", "remark_negative_r", "search_two_point", "smoothed_delta",
    "to_text", "truncate_countable", "truncated_delta",
]
