"""Probabilistic round-off certificates for accumulation loops and steppers."""

__version__ = "0.1.0"

from .intervals import Interval
from .formats import NumberFormat, ErrorTerm, fixed, floating, parse_format, ulp_of
from .prob import (DiscreteSpace, PiecewiseDensity, UniformRV, bayes, cond_prob,
                   convolve, convolve_power, irwin_hall_cdf, product_space)
from .bounds import (Certificate, NotAMartingaleError, VarianceLedger, certify,
                     doob_failure_bound, empirical_martingale_check, max_safe_steps,
                     required_epsilon, success_lower_bound)
from .ir import AnalysisError, ParseError, parse_program
from .analyzer import analyze, build_ledger, propagate_ranges
from .montecarlo import SimConfig, SimReport, simulate_abstract, simulate_concrete

__all__ = [
    "Interval", "NumberFormat", "ErrorTerm", "fixed", "floating", "parse_format",
    "ulp_of", "DiscreteSpace", "PiecewiseDensity", "UniformRV", "bayes", "cond_prob",
    "convolve", "convolve_power", "irwin_hall_cdf", "product_space", "Certificate",
    "NotAMartingaleError", "VarianceLedger", "certify", "doob_failure_bound",
    "empirical_martingale_check", "max_safe_steps", "required_epsilon",
    "success_lower_bound", "AnalysisError", "ParseError", "parse_program", "analyze",
    "build_ledger", "propagate_ranges", "SimConfig", "SimReport", "simulate_abstract",
    "simulate_concrete",
]
