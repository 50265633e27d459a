"""Monotone splitting with anchored resolvent averaging.

Douglas-Rachford / Peaceman-Rachford iterations on averaged operators,
plus a sweep over the averaging weight that separates feasible from
infeasible inclusions.
"""
from .aaca import AacaProblem, AacaResult, aaca_step, certify, solve
from .averaging import AnchoredAverage, averaged_operator, averaged_resolvent, proximal_average
from .dichotomy import Classification, GammaSchedule, default_schedule, sweep
from .operators import CATALOG, Operator
from .splitting import SolverConfig, Status, solve_fixed_point

__version__ = "0.1.0"

__all__ = [
    "AacaProblem",
    "AacaResult",
    "AnchoredAverage",
    "CATALOG",
    "Classification",
    "GammaSchedule",
    "Operator",
    "SolverConfig",
    "Status",
    "aaca_step",
    "averaged_operator",
    "averaged_resolvent",
    "certify",
    "default_schedule",
    "proximal_average",
    "solve",
    "solve_fixed_point",
    "sweep",
]
