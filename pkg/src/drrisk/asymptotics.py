"""Large-sample approximations of DR estimates.

For a smooth functional E(theta) and the fitted profile, the local variance
is ``V = E'(theta_hat)^T I^{-1} E'(theta_hat)`` with I the per-observation
observed information.  The DR estimates then expand as

    gamma = 1:    E(theta_hat) + k V / (2 n)        + O_P(n^{-3/2})
    gamma = inf:  E(theta_hat) + sqrt(2 k V / n)    + O_P(n^{-3/4})

These are certified for bounded functionals (the probability of loss);
for the others they are exposed but not guaranteed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .models import DivergenceProfile
from .risk import RiskFunctional, check_compatible, is_unbounded, risk_derivatives, risk_value


class OrderClaim(enum.Enum):
    OPn32 = "O_P(n^-3/2)"
    OPn34 = "O_P(n^-3/4)"


@dataclass(frozen=True)
class Expansion:
    center_value: float
    correction: float
    order_claim: OrderClaim
    V: float

    @property
    def value(self) -> float:
        return self.center_value + self.correction


def local_variance(profile: DivergenceProfile, functional: RiskFunctional) -> float:
    check_compatible(functional, profile.family)
    grad = np.atleast_1d(risk_derivatives(functional, profile.family, profile.mle, 1))
    inv_info = np.linalg.inv(profile.info_at_mle)
    return float(grad @ inv_info @ grad)


def expand(profile: DivergenceProfile, functional: RiskFunctional, k: float, gamma: float) -> Expansion:
    """Leading-order DR estimate for gamma = 1 or gamma = inf."""
    if not k >= 0.0:
        raise InvalidParameterError(f"k must be >= 0, got {k}")
    if gamma == 1.0:
        claim = OrderClaim.OPn32
    elif math.isinf(gamma):
        claim = OrderClaim.OPn34
    else:
        raise InvalidParameterError("expansions exist only for gamma = 1 and gamma = inf")
    center = risk_value(functional, profile.family, profile.mle)
    if is_unbounded(center):
        raise InvalidParameterError("risk value is infinite at the MLE")
    v = local_variance(profile, functional)
    n = profile.n
    correction = k * v / (2.0 * n) if claim is OrderClaim.OPn32 else math.sqrt(2.0 * k * v / n)
    return Expansion(float(center), correction, claim, v)


def normal_extremum_approx(xbar: float, sigma2hat: float, beta: float, k: float, n: int) -> tuple[float, float]:
    """Maximizer of the quadratic approximation to the Normal linear-payoff problem."""
    if not sigma2hat > 0.0:
        raise InvalidParameterError("sigma2hat must be positive")
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    sigma2_star = sigma2hat * (1.0 + beta**2 * k**2 * sigma2hat / n**2)
    mu_star = xbar + k * beta * sigma2_star / n
    return mu_star, sigma2_star


def quadratic_interior_max(grad0, hessian0) -> np.ndarray:
    """Leading-order interior maximizer ``-H^{-1} g`` of a locally quadratic function."""
    g = np.atleast_1d(np.asarray(grad0, dtype=float))
    h = np.atleast_2d(np.asarray(hessian0, dtype=float))
    if h.shape != (g.size, g.size):
        raise InvalidInputError(f"Hessian shape {h.shape} does not match gradient of size {g.size}")
    if not np.allclose(h, h.T) or np.linalg.eigvalsh(h).max() >= 0.0:
        raise InvalidInputError("Hessian must be symmetric negative definite")
    return -np.linalg.solve(h, g)
