"""Conformal-projective prediction for conjugate linear models and Gaussian processes."""

__version__ = "0.1.0"

from .conjugate import (  # noqa: E402
    Dataset,
    LooPredictive,
    PosteriorState,
    PriorSpec,
    SwapCoefficients,
    fit_posterior,
    loo_predictive,
    map_predictive,
    swap_coefficients_fast,
    swap_coefficients_naive,
)
from .basis import BasisSpec, basis_expand  # noqa: E402
from .divergences import (  # noqa: E402
    DivergenceKind,
    GaussianLaw,
    bhattacharyya_coefficient,
    convexity_radius,
    dpd,
    hellinger_sq,
    score_bound,
    score_dpd,
    score_hellinger,
)
from .gp import GpModel, KernelSpec, fit_gp, gp_loo_predictive, gp_predictive, gp_swap_coefficients  # noqa: E402
from .solver import (  # noqa: E402
    CppConfig,
    CppProblem,
    CppSolution,
    assemble_problem,
    draw_sigma2_posterior,
    linear_problem,
    objective_eval,
    scaled_problem,
    solve,
    solve_1d,
    solve_approach_I,
    solve_approach_II,
    solve_logbc_closed_form,
)
from .engine import ModelConfig, Predictions, predict  # noqa: E402
from .lab import (  # noqa: E402
    ContaminationSpec,
    ReplicateResult,
    SimScenario,
    contaminate,
    elpd_probe,
    generate_data,
    influence_sweep,
    mlpd,
    run_scenario,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
