"""Divergence-robust (DR) estimation.

The DR estimate of a risk functional R is

    sup over admissible theta of  R(theta) - (alpha(theta) / k) ** gamma

where alpha is the divergence of the fitted profile.  With a truncation
exponent delta only parameters with alpha <= n**delta are admissible; with
gamma = inf the penalty is 0 when alpha <= k and +inf otherwise.

The maximization is a grid search (512 points by default) followed by
golden-section refinement of the best bracket.  Unboundedness is detected
symbolically where a closed form diverges inside the admissible region and
numerically when the objective exceeds ``UNBOUNDED_THRESHOLD``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAdmissibleSetError, InvalidParameterError, UnsupportedCombinationError
from .models import EDGE_MARGIN, DivergenceProfile, NormalParams, Observations
from .risk import (
    UNBOUNDED,
    RiskFunctional,
    RiskId,
    check_compatible,
    is_unbounded,
    pareto_values,
    singular_theta,
)

GRID_POINTS = 512
INTERIOR_MARGIN = 1e-3
UNBOUNDED_THRESHOLD = 1e12
BISECTION_TOL = 1e-12
# An argmax closer than this to an open domain edge is not "strictly inside".
EDGE_TOL = 1e-8
# Golden-section stopping width relative to 1 + |theta|.  Tighter than the
# 1e-10 that the argmax needs: where the risk value is tiny but steep in theta
# the value itself is only accurate to (relative slope) * (bracket width).
GOLDEN_TOL = 1e-13


class Verdict(enum.Enum):
    REGULAR = "Regular"
    BOUNDARY_ATTAINED = "BoundaryAttained"
    UNBOUNDED = "Unbounded"
    DOMAIN_EDGE_DIVERGENCE = "DomainEdgeDivergence"


@dataclass(frozen=True)
class DRQuery:
    functional: RiskFunctional
    k: float = 1.0
    gamma: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise InvalidParameterError(f"k must be a positive number, got {self.k}")
        if not self.gamma >= 1.0:
            raise InvalidParameterError(f"gamma must be >= 1 or inf, got {self.gamma}")
        if self.delta is not None and not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise InvalidParameterError(f"delta must be a finite number >= 0, got {self.delta}")

    @property
    def hard_constraint(self) -> bool:
        return math.isinf(self.gamma)

    def truncation_bound(self, n: int) -> float:
        return math.inf if self.delta is None else float(n) ** self.delta


@dataclass(frozen=True)
class AdmissibleSet:
    """Interval of the search parameter on which alpha <= bound.

    The search parameter is theta for Pareto families and sigma2 for the
    Normal family (whose mean is profiled out in closed form).
    """

    bound: float
    lo: float
    hi: float
    lo_at_edge: bool
    hi_at_edge: bool
    parameter: str = "theta"

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)


@dataclass
class DREstimate:
    value: object
    argmax: object
    alpha_at_argmax: float
    penalty_at_argmax: float
    verdict: Verdict
    bound_used: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_regular(self) -> bool:
        return self.verdict is Verdict.REGULAR


# ---------------------------------------------------------------------------
# Admissible set


def _crossing(func, inside: float, outside: float, level: float) -> float:
    """Bisect for func == level; returns a point with func <= level.

    Requires func(inside) <= level < func(outside) and func monotone between.
    """
    while abs(outside - inside) > BISECTION_TOL:
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if func(mid) <= level:
            inside = mid
        else:
            outside = mid
    return inside


def _side_endpoint(func, ref: float, step: float, edge: float | None, level: float, direction: int):
    """Endpoint of {func <= level} on one side of ``ref``.

    ``edge`` is the open domain edge on that side (None for infinity).
    Returns (endpoint, touches_edge).  ``step`` seeds the bracket.
    """
    if edge is not None:
        edge_point = edge + EDGE_MARGIN if direction < 0 else edge - EDGE_MARGIN
        if func(edge_point) <= level:
            return edge_point, True
    guess = ref + direction * step
    if edge is not None and (guess - edge) * direction >= 0:
        guess = 0.5 * (ref + edge_point)
    inside = ref
    while func(guess) <= level:
        inside = guess
        if edge is None:
            step *= 2.0
            guess = ref + direction * step
        else:
            guess = 0.5 * (guess + edge_point)
        if not math.isfinite(guess):
            raise EmptyAdmissibleSetError("could not bracket the admissible set")
    return _crossing(func, inside, guess, level), False


def _set_from_bound(profile: DivergenceProfile, bound_lo: float, bound_hi: float) -> AdmissibleSet:
    if profile.family.is_pareto:
        func, ref, edge = profile.alpha_theta, profile.mle, profile.family.lower
        step = ref * math.sqrt(2.0 * max(bound_lo, bound_hi) / profile.n) if math.isfinite(max(bound_lo, bound_hi)) else ref
        parameter = "theta"
    else:
        func, ref, edge = profile.alpha_sigma2, profile.sigma2hat, 0.0
        step = ref * math.sqrt(4.0 * max(bound_lo, bound_hi) / profile.n) if math.isfinite(max(bound_lo, bound_hi)) else ref
        parameter = "sigma2"
    if func(ref) > min(bound_lo, bound_hi):
        raise EmptyAdmissibleSetError("divergence exceeds the bound at the reference point")
    if math.isinf(bound_lo):
        lo, lo_edge = edge + EDGE_MARGIN, True
    else:
        lo, lo_edge = _side_endpoint(func, ref, step, edge, bound_lo, -1)
    if math.isinf(bound_hi):
        hi, hi_edge = math.inf, True
    else:
        hi, hi_edge = _side_endpoint(func, ref, step, None, bound_hi, +1)
    return AdmissibleSet(bound=max(bound_lo, bound_hi), lo=lo, hi=hi, lo_at_edge=lo_edge, hi_at_edge=hi_edge, parameter=parameter)


def admissible_set(profile: DivergenceProfile, query: DRQuery) -> AdmissibleSet:
    """The region where the (possibly truncated) penalty is finite.

    bound is n**delta with truncation, k for gamma = inf (the smaller of the
    two when both apply) and +inf otherwise.  Finite endpoints are found by
    bisection to 1e-12 and always satisfy alpha <= bound.
    """
    bound = query.truncation_bound(profile.n)
    if query.hard_constraint:
        bound = min(bound, query.k)
    return _set_from_bound(profile, bound, bound)


# ---------------------------------------------------------------------------
# One-dimensional maximization


def _golden_max(func, a: float, b: float, tol_rel: float = GOLDEN_TOL):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    while abs(b - a) > tol_rel * (1.0 + abs(c)) and a < c < d < b:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    x = c if fc >= fd else d
    return x, max(fc, fd)


def _grid(lo: float, hi: float, at_edge: bool, edge: float, points: int) -> np.ndarray:
    if at_edge:
        # Geometric in the distance to the edge so the singular end is resolved.
        span = hi - edge
        return edge + span * np.geomspace(max(lo - edge, EDGE_MARGIN) / span, 1.0, points)
    return np.linspace(lo, hi, points)


def _maximize(objective, grid: np.ndarray, extra: tuple = ()):
    """Grid search, golden refinement of the best bracket, then best candidate."""
    values = objective(grid)
    i = int(np.argmax(values))
    lo_i, hi_i = max(i - 1, 0), min(i + 1, grid.size - 1)

    def scalar(x):
        return float(objective(np.array([x]))[0])

    cands = [(float(values[i]), float(grid[i]))]
    if hi_i > lo_i:
        x, fx = _golden_max(scalar, float(grid[lo_i]), float(grid[hi_i]))
        cands.append((fx, x))
    for x in (float(grid[0]), float(grid[-1])) + tuple(extra):
        cands.append((scalar(x), x))
    fbest, xbest = max(cands)
    return xbest, fbest, values


def _penalty(alpha, k: float, gamma: float):
    if math.isinf(gamma):
        return np.zeros_like(alpha)
    return (alpha / k) ** gamma


# ---------------------------------------------------------------------------
# DR estimation


def dr_estimate(
    profile: DivergenceProfile,
    query: DRQuery,
    obs: Observations | None = None,
    grid_points: int = GRID_POINTS,
) -> DREstimate:
    """Maximize the penalized objective and classify the result.

    ``obs`` is accepted for interface symmetry; everything needed is in
    ``profile``.
    """
    check_compatible(query.functional, profile.family)
    if profile.family.is_pareto:
        return _pareto_estimate(profile, query, grid_points)
    return _normal_estimate(profile, query, grid_points)


def _verdict(value, argmax_edge_gap, alpha, bound_used) -> Verdict:
    if is_unbounded(value):
        return Verdict.UNBOUNDED
    if argmax_edge_gap is not None and argmax_edge_gap <= EDGE_TOL:
        return Verdict.DOMAIN_EDGE_DIVERGENCE
    if not alpha < (1.0 - INTERIOR_MARGIN) * bound_used:
        return Verdict.BOUNDARY_ATTAINED
    return Verdict.REGULAR


def _unbounded(bound_used, diagnostics, reason, at_edge) -> DREstimate:
    diagnostics["unbounded_reason"] = reason
    diagnostics["domain_edge_divergence"] = at_edge
    return DREstimate(UNBOUNDED, None, math.nan, math.nan, Verdict.UNBOUNDED, bound_used, diagnostics)


def _base_diagnostics(profile: DivergenceProfile, query: DRQuery) -> dict:
    diag = {"grid": "uniform"}
    if profile.constrained:
        diag["constrained_reference"] = True
    if query.hard_constraint and query.delta is not None:
        diag["gamma_inf_truncation_convention"] = "bound = min(k, n**delta)"
    return diag


def _pareto_estimate(profile: DivergenceProfile, query: DRQuery, grid_points: int) -> DREstimate:
    functional, k, gamma = query.functional, query.k, query.gamma
    family, ref = profile.family, profile.mle
    bound_used = query.truncation_bound(profile.n)
    diag = _base_diagnostics(profile, query)
    aset = admissible_set(profile, query)
    diag["admissible_interval"] = [aset.lo, aset.hi]
    diag["admissible_bound"] = aset.bound

    sing = singular_theta(functional)
    if sing is not None and (sing >= aset.lo or (aset.lo_at_edge and sing >= family.lower)):
        at_edge = aset.lo_at_edge and sing <= family.lower + EDGE_MARGIN
        reason = f"{functional.id.value} diverges for theta <= {sing:g} inside the admissible set"
        return _unbounded(bound_used, diag, reason, at_edge)

    def risk(theta):
        return pareto_values(functional, theta)

    if math.isinf(aset.bound):
        # Untruncated with finite gamma.  Every Pareto functional is
        # nonincreasing in theta, so above ref any alpha > k loses to ref,
        # and below ref any alpha beyond the lower bound does too.
        r_ref = risk(ref)
        r_sup = risk(family.lower + EDGE_MARGIN)
        if not math.isfinite(r_sup):
            return _unbounded(bound_used, diag, "risk value overflows at the domain edge", True)
        bound_lo = k * (r_sup - r_ref + 1.0) ** (1.0 / gamma)
        search = _set_from_bound(profile, bound_lo, k)
        diag["search_interval"] = [search.lo, search.hi]
    else:
        search = aset

    grid = _grid(search.lo, search.hi, search.lo_at_edge, family.lower, grid_points)
    if search.lo_at_edge:
        diag["grid"] = "geometric"

    def objective(theta):
        theta = np.asarray(theta, dtype=float)
        return risk(theta) - _penalty(profile.alpha_theta(theta), k, gamma)

    grid_values = objective(grid)
    if not np.all(np.isfinite(grid_values)) or grid_values.max() > UNBOUNDED_THRESHOLD:
        at_edge = search.lo_at_edge and not np.isfinite(grid_values[0])
        return _unbounded(bound_used, diag, "objective exceeds the unboundedness threshold", at_edge)

    theta_star, value, _ = _maximize(objective, grid, extra=(ref,))
    if value > UNBOUNDED_THRESHOLD:
        return _unbounded(bound_used, diag, "objective exceeds the unboundedness threshold", search.lo_at_edge)
    alpha_star = float(profile.alpha_theta(theta_star))
    penalty = float(_penalty(np.array(alpha_star), k, gamma))
    gap = theta_star - family.lower if search.lo_at_edge else None
    verdict = _verdict(value, gap, alpha_star, bound_used)
    return DREstimate(value, theta_star, alpha_star, penalty, verdict, bound_used, diag)


def _normal_mean_offset(beta, alpha_s, c, budget, k, gamma):
    """Best mean offset d = mu - xbar for each variance on the grid.

    Maximizes beta*d - ((alpha_s + c*d**2)/k)**gamma subject to
    c*d**2 <= budget.  Closed form for gamma = 1 and gamma = inf, vectorized
    bisection on the first-order condition otherwise.
    """
    d_max = np.sqrt(np.maximum(budget, 0.0) / c)
    sign = 1.0 if beta >= 0 else -1.0
    if beta == 0.0:
        return np.zeros_like(alpha_s)
    if math.isinf(gamma):
        return sign * d_max
    if gamma == 1.0:
        d_free = k * beta / (2.0 * c)
        return np.clip(d_free, -d_max, d_max)
    lo = np.zeros_like(d_max)
    hi = d_max.copy()

    def slope(d):
        return abs(beta) - gamma / k * ((alpha_s + c * d * d) / k) ** (gamma - 1.0) * 2.0 * c * d

    at_cap = slope(hi) >= 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        up = slope(mid) > 0.0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return sign * np.where(at_cap, d_max, 0.5 * (lo + hi))


def _normal_estimate(profile: DivergenceProfile, query: DRQuery, grid_points: int) -> DREstimate:
    beta, k, gamma = query.functional.level, query.k, query.gamma
    xbar, n = profile.xbar, profile.n
    bound_used = query.truncation_bound(n)
    diag = _base_diagnostics(profile, query)
    aset = admissible_set(profile, query)
    diag["admissible_interval"] = [aset.lo, aset.hi]
    diag["admissible_bound"] = aset.bound

    if math.isinf(aset.bound):
        if beta != 0.0:
            # The payoff gain grows linearly in sigma2 while the penalty grows like log(sigma2).
            return _unbounded(bound_used, diag, "variance growth dominates the penalty", True)
        search = _set_from_bound(profile, k, k)
    else:
        search = aset
    budget_bound = search.bound

    def offsets(s):
        s = np.asarray(s, dtype=float)
        alpha_s = profile.alpha_sigma2(s)
        c = 0.5 * n / s
        return _normal_mean_offset(beta, alpha_s, c, budget_bound - alpha_s, k, gamma), alpha_s, c

    def objective(s):
        d, alpha_s, c = offsets(s)
        return beta * d - _penalty(alpha_s + c * d * d, k, gamma)

    grid = np.linspace(search.lo, search.hi, grid_points)
    grid_values = objective(grid)
    if not np.all(np.isfinite(grid_values)) or grid_values.max() + beta * xbar > UNBOUNDED_THRESHOLD:
        return _unbounded(bound_used, diag, "objective exceeds the unboundedness threshold", False)
    s_star, _, _ = _maximize(objective, grid, extra=(profile.sigma2hat,))
    d_star, alpha_s, c = offsets(np.array([s_star]))
    mu_star = xbar + float(d_star[0])
    alpha_star = float(profile.alpha_normal(mu_star, s_star))
    penalty = float(_penalty(np.array(alpha_star), k, gamma))
    value = beta * mu_star - penalty
    verdict = _verdict(value, None, alpha_star, bound_used)
    return DREstimate(value, NormalParams(mu_star, s_star), alpha_star, penalty, verdict, bound_used, diag)


# ---------------------------------------------------------------------------
# Diagnostics built on dr_estimate


def regularity_check(estimate: DREstimate) -> tuple[bool, str]:
    """Whether the estimate is regular, with the reason when it is not."""
    v = estimate.verdict
    if v is Verdict.REGULAR:
        return True, "finite maximum attained strictly inside the admissible set"
    if v is Verdict.UNBOUNDED:
        reason = "value not finite"
        if estimate.diagnostics.get("domain_edge_divergence"):
            reason += " (divergence at the family domain edge)"
        return False, reason
    if v is Verdict.DOMAIN_EDGE_DIVERGENCE:
        return False, "supremum approached at the open family domain edge"
    return False, "maximizer within boundary tolerance of the truncation bound"


@dataclass
class GammaTransferReport:
    skipped: bool
    reason: str
    base_ratio: float
    ratios: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def gamma_transfer_check(profile: DivergenceProfile, query_gamma1: DRQuery, gammas, obs=None) -> GammaTransferReport:
    """If the gamma = 1 maximizer has alpha/k < 1, so must every gamma > 1 maximizer."""
    if query_gamma1.gamma != 1.0:
        raise InvalidParameterError("the base query must have gamma = 1")
    base = dr_estimate(profile, query_gamma1)
    if is_unbounded(base.value):
        return GammaTransferReport(True, "gamma = 1 estimate is unbounded", math.nan)
    base_ratio = base.alpha_at_argmax / query_gamma1.k
    if not base_ratio < 1.0:
        return GammaTransferReport(True, f"gamma = 1 maximizer has alpha/k = {base_ratio:.6g} >= 1", base_ratio)
    report = GammaTransferReport(False, "", base_ratio)
    for g in gammas:
        if not g > 1.0:
            raise InvalidParameterError(f"transfer gammas must exceed 1, got {g}")
        est = dr_estimate(profile, DRQuery(query_gamma1.functional, query_gamma1.k, g, query_gamma1.delta))
        ratio = math.inf if is_unbounded(est.value) else est.alpha_at_argmax / query_gamma1.k
        report.ratios[g] = ratio
        if not ratio < 1.0:
            report.violations.append((g, ratio))
    return report


__all__ = [
    "AdmissibleSet",
    "DREstimate",
    "DRQuery",
    "GammaTransferReport",
    "RiskId",
    "Verdict",
    "admissible_set",
    "dr_estimate",
    "gamma_transfer_check",
    "regularity_check",
]
