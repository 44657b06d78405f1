"""Accelerated first-order methods with adaptive restart, plus spectral analysis on quadratics."""

from .analysis import (
    QuadSystem,
    char_roots,
    ogm_q_coeffs,
    rho_T,
    rho_T_lambda,
    simulate_modes,
    tuned_rates,
)
from .engine import (
    SolverConfig,
    Trace,
    afm_run,
    fixed_restart_run,
    iterations_to_tol,
    k_fixed,
    ogm_restart_run,
    pogm_restart_run,
    proximal_gradient_run,
    relative_gap,
)
from .oracles import (
    CompositeProblem,
    QuadraticProblem,
    fixed_quadratic_case2,
    gen_boxqp,
    gen_lasso,
    gen_logsumexp,
    gen_quadratic,
)
from .schedules import Schedule, ScheduleKind, coefficients

__version__ = "0.1.0"
