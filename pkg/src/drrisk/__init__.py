"""Divergence-robust estimation of risk functionals for parametric models."""

__version__ = "0.1.0"

from .asymptotics import Expansion, OrderClaim, expand, local_variance, normal_extremum_approx, quadratic_interior_max
from .engine import (
    AdmissibleSet,
    DREstimate,
    DRQuery,
    GammaTransferReport,
    Verdict,
    admissible_set,
    dr_estimate,
    gamma_transfer_check,
    regularity_check,
)
from .errors import (
    DRError,
    EmptyAdmissibleSetError,
    InvalidDataError,
    InvalidInputError,
    InvalidParameterError,
    MLEOutsideDomainError,
    OracleFailureError,
    UnsupportedCombinationError,
)
from .harness import BetaRule, ExperimentPlan, FrontierReport, frontier_sweep, load_plan, run_plan, sweep_summary
from .models import (
    DivergenceProfile,
    ModelFamily,
    NormalParams,
    Observations,
    build_profile,
    divergence,
    information,
    log_likelihood,
    mle,
    sample,
)
from .risk import UNBOUNDED, RiskFunctional, RiskId, expectation_oracle, is_unbounded, risk_derivatives, risk_value

__all__ = [name for name in dir() if not name.startswith("_")]
