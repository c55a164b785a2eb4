"""Risk functionals as functions of the model parameter.

Pareto functionals (``theta`` is the tail index, ``level`` is beta):

=================  ==================================  ==================
id                 value                               level
=================  ==================================  ==================
ES                 theta/(theta-1) * beta**(-1/theta)  tail prob in (0,1)
VAR                beta**(-1/theta)                    tail prob in (0,1)
PROB_LOSS          beta**(-theta)                      threshold >= 1
INTEGRATED_TAIL    beta**(1-theta)/(theta-1)           threshold >= 1
CRAMER_LUNDBERG    beta**(1-theta)/theta               threshold >= 1
MINMAXVAR          beta*theta/(beta*theta-1)           exponent > 0
=================  ==================================  ==================

The Normal family supports only ``LINEAR_PAYOFF``, the expectation of
``beta * X``.

Every Pareto functional above is nonincreasing in ``theta``; the engine
relies on this.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats

from .errors import InvalidParameterError, OracleFailureError, UnsupportedCombinationError
from .models import ModelFamily, ParamPoint


class Unbounded:
    """The +infinity marker for risk values and DR estimates.

    Arithmetic involving the marker yields the marker; it compares greater
    than every number.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "+inf"

    __str__ = __repr__

    def __float__(self):
        return math.inf

    def __reduce__(self):
        return (Unbounded, ())

    def _absorb(self, other):
        return self

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _absorb
    __truediv__ = __rtruediv__ = __pow__ = __rpow__ = _absorb

    def __neg__(self):
        return self

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("drrisk.Unbounded")

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self


UNBOUNDED = Unbounded()

RiskValue = "float | Unbounded"


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


class RiskId(enum.Enum):
    ES = "es"
    VAR = "var"
    PROB_LOSS = "prob_loss"
    INTEGRATED_TAIL = "integrated_tail"
    CRAMER_LUNDBERG = "cramer_lundberg"
    MINMAXVAR = "minmaxvar"
    LINEAR_PAYOFF = "linear"


PARETO_IDS = (
    RiskId.ES,
    RiskId.VAR,
    RiskId.PROB_LOSS,
    RiskId.INTEGRATED_TAIL,
    RiskId.CRAMER_LUNDBERG,
    RiskId.MINMAXVAR,
)
# These need an integrable model, i.e. a domain at or above theta > 1.
_NEEDS_INTEGRABLE = (RiskId.ES, RiskId.INTEGRATED_TAIL, RiskId.CRAMER_LUNDBERG, RiskId.MINMAXVAR)

_ALIASES = {
    "es": RiskId.ES,
    "expected_shortfall": RiskId.ES,
    "var": RiskId.VAR,
    "value_at_risk": RiskId.VAR,
    "pl": RiskId.PROB_LOSS,
    "prob_loss": RiskId.PROB_LOSS,
    "probloss": RiskId.PROB_LOSS,
    "it": RiskId.INTEGRATED_TAIL,
    "integrated_tail": RiskId.INTEGRATED_TAIL,
    "cl": RiskId.CRAMER_LUNDBERG,
    "cramer_lundberg": RiskId.CRAMER_LUNDBERG,
    "minmaxvar": RiskId.MINMAXVAR,
    "mmv": RiskId.MINMAXVAR,
    "linear": RiskId.LINEAR_PAYOFF,
    "linear_payoff": RiskId.LINEAR_PAYOFF,
}


def parse_risk_id(name: str) -> RiskId:
    key = name.strip().lower().replace("-", "_")
    if key not in _ALIASES:
        raise InvalidParameterError(f"unknown risk functional {name!r}")
    return _ALIASES[key]


@dataclass(frozen=True)
class RiskFunctional:
    id: RiskId
    level: float

    def __post_init__(self):
        level = float(self.level)
        object.__setattr__(self, "level", level)
        if not math.isfinite(level):
            raise InvalidParameterError("risk level must be finite")
        rid = self.id
        if rid in (RiskId.ES, RiskId.VAR) and not 0.0 < level < 1.0:
            raise InvalidParameterError(f"{rid.value} tail probability must lie in (0, 1), got {level}")
        if rid in (RiskId.PROB_LOSS, RiskId.INTEGRATED_TAIL, RiskId.CRAMER_LUNDBERG) and not level >= 1.0:
            raise InvalidParameterError(f"{rid.value} loss threshold must be >= 1, got {level}")
        if rid is RiskId.MINMAXVAR and not level > 0.0:
            raise InvalidParameterError(f"minmaxvar exponent must be positive, got {level}")

    @classmethod
    def parse(cls, name: str, level: float) -> "RiskFunctional":
        return cls(parse_risk_id(name), level)


def check_compatible(functional: RiskFunctional, family: ModelFamily) -> None:
    if functional.id is RiskId.LINEAR_PAYOFF:
        if family.is_pareto:
            raise UnsupportedCombinationError("the linear payoff is only supported for the Normal family")
        return
    if not family.is_pareto:
        raise UnsupportedCombinationError(f"{functional.id.value} is only supported for the Pareto family")
    if functional.id in _NEEDS_INTEGRABLE and family.theta_min < 1.0:
        raise UnsupportedCombinationError(
            f"{functional.id.value} needs an integrable family (theta > 1 or stricter), got {family.describe()}"
        )


def singular_theta(functional: RiskFunctional) -> float | None:
    """Parameter value at or below which the Pareto closed form is infinite."""
    rid, beta = functional.id, functional.level
    if rid in (RiskId.ES, RiskId.INTEGRATED_TAIL):
        return 1.0
    if rid is RiskId.VAR:
        return 0.0
    if rid is RiskId.MINMAXVAR:
        return 1.0 / beta
    return None


def pareto_values(functional: RiskFunctional, theta):
    """Vectorized closed form; returns ``inf`` wherever the formula diverges."""
    theta = np.asarray(theta, dtype=float)
    beta = functional.level
    logb = math.log(beta)
    rid = functional.id
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if rid is RiskId.ES:
            out = theta / (theta - 1.0) * np.exp(-logb / theta)
            out = np.where(theta > 1.0, out, np.inf)
        elif rid is RiskId.VAR:
            out = np.where(theta > 0.0, np.exp(-logb / theta), np.inf)
        elif rid is RiskId.PROB_LOSS:
            out = np.exp(-theta * logb)
        elif rid is RiskId.INTEGRATED_TAIL:
            out = np.exp((1.0 - theta) * logb) / (theta - 1.0)
            out = np.where(theta > 1.0, out, np.inf)
        elif rid is RiskId.CRAMER_LUNDBERG:
            out = np.exp((1.0 - theta) * logb) / theta
        elif rid is RiskId.MINMAXVAR:
            bt = beta * theta
            out = np.where(bt > 1.0, bt / (bt - 1.0), np.inf)
        else:
            raise UnsupportedCombinationError(f"{rid.value} is not a Pareto functional")
    out = np.where(np.isnan(out), np.inf, out)
    return out if out.ndim else float(out)


def risk_value(functional: RiskFunctional, family: ModelFamily, params: ParamPoint):
    """Exact closed-form value, or UNBOUNDED where the formula diverges."""
    check_compatible(functional, family)
    params = family.check_params(params)
    if functional.id is RiskId.LINEAR_PAYOFF:
        return functional.level * params.mu
    value = pareto_values(functional, params)
    return value if math.isfinite(value) else UNBOUNDED


def _leibniz(f_derivs, g_derivs, order):
    return sum(math.comb(order, j) * f_derivs[j] * g_derivs[order - j] for j in range(order + 1))


def _pareto_derivatives(functional: RiskFunctional, theta: float) -> list[float]:
    """Derivatives of orders 0..3 in theta of the closed form."""
    beta = functional.level
    b = math.log(beta)
    rid = functional.id
    if rid in (RiskId.ES, RiskId.VAR):
        # beta**(-1/theta) = exp(s) with s = -b/theta.
        s1, s2, s3 = b / theta**2, -2.0 * b / theta**3, 6.0 * b / theta**4
        v = math.exp(-b / theta)
        v_derivs = [v, s1 * v, (s2 + s1**2) * v, (s3 + 3.0 * s1 * s2 + s1**3) * v]
        if rid is RiskId.VAR:
            return v_derivs
        c = theta - 1.0
        h_derivs = [theta / c, -1.0 / c**2, 2.0 / c**3, -6.0 / c**4]
        return [_leibniz(h_derivs, v_derivs, m) for m in range(4)]
    if rid is RiskId.PROB_LOSS:
        p = math.exp(-theta * b)
        return [(-b) ** m * p for m in range(4)]
    if rid in (RiskId.INTEGRATED_TAIL, RiskId.CRAMER_LUNDBERG):
        u = math.exp((1.0 - theta) * b)
        u_derivs = [(-b) ** m * u for m in range(4)]
        c = theta - 1.0 if rid is RiskId.INTEGRATED_TAIL else theta
        w_derivs = [(-1) ** m * math.factorial(m) / c ** (m + 1) for m in range(4)]
        return [_leibniz(w_derivs, u_derivs, m) for m in range(4)]
    if rid is RiskId.MINMAXVAR:
        c = beta * theta - 1.0
        return [1.0 + 1.0 / c] + [(-1) ** m * math.factorial(m) * beta**m / c ** (m + 1) for m in (1, 2, 3)]
    raise UnsupportedCombinationError(f"{rid.value} is not a Pareto functional")


def risk_derivatives(functional: RiskFunctional, family: ModelFamily, params: ParamPoint, order: int):
    """Analytic derivative of the given order (1, 2 or 3) in the parameter.

    For the Normal linear payoff the result is an array with one axis per
    order over (mu, sigma2).
    """
    if order not in (1, 2, 3):
        raise InvalidParameterError("derivative order must be 1, 2 or 3")
    value = risk_value(functional, family, params)
    if is_unbounded(value):
        raise InvalidParameterError(f"{functional.id.value} is infinite at {params!r}")
    if functional.id is RiskId.LINEAR_PAYOFF:
        out = np.zeros((2,) * order)
        if order == 1:
            out[0] = functional.level
        return out
    derivs = _pareto_derivatives(functional, float(params))
    d = derivs[order]
    if not math.isfinite(d):
        raise InvalidParameterError(f"derivative of {functional.id.value} overflows at theta={params!r}")
    return d


# ---------------------------------------------------------------------------
# Quadrature oracle


def _quad(func, a, b):
    value, abserr, info, *rest = integrate.quad(func, a, b, epsabs=0.0, epsrel=1e-12, limit=200, full_output=1)
    if rest or not math.isfinite(value):
        raise OracleFailureError(f"quadrature did not converge on [{a}, {b}]: {rest[0] if rest else value}")
    return value, abserr


def _log_tail_integral(log_integrand, y0):
    """log of the integral of ``exp(log_integrand(y))`` over (y0, inf).

    Works in log coordinates (y = log x) and rescales by the integrand at
    ``y0`` so heavy tails neither overflow nor underflow.  Finite chunks of
    doubling width are summed until a chunk no longer contributes.
    """
    shift = log_integrand(y0)
    total, err = 0.0, 0.0
    a, width = y0, 1.0
    for _ in range(60):
        part, part_err = _quad(lambda y: math.exp(log_integrand(y) - shift), a, a + width)
        total += part
        err += part_err
        a += width
        width *= 2.0
        if part <= 1e-16 * total:
            break
    else:
        raise OracleFailureError("tail integral did not settle")
    if not total > 0.0 or err > 1e-9 * total:
        raise OracleFailureError(f"quadrature error estimate {err:g} too large for value {total:g}")
    return shift + math.log(total)


def _tail_integral(log_integrand, y0):
    return math.exp(_log_tail_integral(log_integrand, y0))


def expectation_oracle(family: ModelFamily, params: ParamPoint, functional: RiskFunctional) -> float:
    """Recompute a risk value by numerical integration of the model density.

    Every quantity is an integral of the density ``theta * x**-(1+theta)``
    (or the Gaussian density), so no code is shared with the closed forms.
    Raises OracleFailureError when quadrature does not converge.
    """
    check_compatible(functional, family)
    params = family.check_params(params)
    beta = functional.level
    if functional.id is RiskId.LINEAR_PAYOFF:
        mu, sigma = params.mu, math.sqrt(params.sigma2)
        dist = stats.norm(loc=mu, scale=sigma)
        value, _ = _quad(lambda x: beta * x * dist.pdf(x), mu - 40.0 * sigma, mu + 40.0 * sigma)
        return value

    theta = params
    log_theta = math.log(theta)

    # Densities in y = log x include the Jacobian dx = x dy.
    def log_density_y(y):
        return log_theta - theta * y

    def tail_prob(y0):
        return _tail_integral(log_density_y, y0)

    def log_survival_y(y):
        # log P(X > e**y), itself a quadrature of the density.
        return _log_tail_integral(log_density_y, y)

    rid = functional.id
    if rid is RiskId.PROB_LOSS:
        return tail_prob(math.log(beta))
    if rid is RiskId.VAR:
        return math.exp(_quantile_log(tail_prob, beta))
    if rid is RiskId.ES:
        y_q = _quantile_log(tail_prob, beta)
        return _tail_integral(lambda y: log_density_y(y) + y, y_q) / beta
    if rid is RiskId.INTEGRATED_TAIL:
        return _integrated_survival(log_survival_y, math.log(beta))
    if rid is RiskId.CRAMER_LUNDBERG:
        mean = 1.0 + _integrated_survival(log_survival_y, 0.0)
        return _integrated_survival(log_survival_y, math.log(beta)) / mean
    if rid is RiskId.MINMAXVAR:
        if beta * theta <= 1.0:
            raise OracleFailureError("minmaxvar is infinite for beta*theta <= 1")
        # Distorted mean: integral of lambda'(F(x)) x f(x) dx with lambda(u) = 1 - (1 - u)**beta.
        log_beta = math.log(beta)
        return _tail_integral(
            lambda y: log_beta + (beta - 1.0) * (-theta * y) + log_density_y(y) + y, 0.0
        )
    raise UnsupportedCombinationError(f"no oracle for {rid.value}")


def _integrated_survival(log_survival_y, y0):
    """Integral over x > e**y0 of P(X > x) dx, with P(X > x) itself by quadrature."""
    return _tail_integral(lambda y: log_survival_y(y) + y, y0)


def _quantile_log(tail_prob, beta):
    """log of the (1 - beta) quantile, from root finding on the tail probability."""

    def excess(y):
        return math.log(tail_prob(y)) - math.log(beta)

    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise OracleFailureError("could not bracket the quantile")
    return optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15)
