"""Accelerated SGD on overparameterized least squares: bounds, oracle, simulation."""

from .errors import InfeasibleError, ValidationError
from .spectrum import ProblemInstance, Spectrum, make_spectrum, segmented_norm, tail_sum
from .hyper import (
    BoundConstants, Cutoffs, HyperParams, bound_constants, compute_cutoffs,
    derive_classical, derive_from_alpha, derive_overparam, derive_shb, manual_params,
)
from .blockdyn import EigenPair, block, decay_rate, eigenpair, partial_sum_vec, power_closed
from .bounds import (
    BoundReport, CompareReport, ScalingFit, asgd_bound, classical_bound,
    compare_report, onehot_bound, sgd_bound, shb_bound, variance_scaling,
)
from .simulate import (
    DataModel, MonteCarloResult, PathRisk, RunState, asgd_step, init_state,
    make_stream, monte_carlo, run_decomposed, run_tail_averaged, sample,
)
from .oracle import (
    FourthMomentModel, MomentState, RiskBreakdown, StationaryDiagnostic,
    exact_risk, stationary_check, stationary_solve,
)

__version__ = "0.1.0"
