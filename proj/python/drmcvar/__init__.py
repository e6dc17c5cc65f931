"""Multi-level CVaR portfolio optimization with mean uncertainty sets.

Arrays are NumPy float64; scenario matrices are Q x N simple returns.
"""

from ._core import (
    DataError,
    Error,
    SolverError,
    ValidationError,
    auxiliary_f,
    baselines,
    calibrate_delta,
    dr_mcvar,
    empirical_cvar,
    empirical_var,
    estimate_mean,
    excess_risk,
    load_panel,
    mean_cvar,
    mean_multi_cvar,
    min_cvar,
    pre_rebalance_weights,
    required_return,
    run,
    summary_metrics,
    turnover,
    worst_case_mean,
)

__all__ = [
    "DataError",
    "Error",
    "SolverError",
    "ValidationError",
    "auxiliary_f",
    "baselines",
    "calibrate_delta",
    "dr_mcvar",
    "empirical_cvar",
    "empirical_var",
    "estimate_mean",
    "excess_risk",
    "load_panel",
    "mean_cvar",
    "mean_multi_cvar",
    "min_cvar",
    "pre_rebalance_weights",
    "required_return",
    "run",
    "summary_metrics",
    "turnover",
    "worst_case_mean",
]
