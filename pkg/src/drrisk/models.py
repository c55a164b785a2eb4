"""Parametric iid model families.

Two families are supported: the two-parameter Normal and the one-parameter
Pareto with known minimal value 1, density ``theta * x**-(1 + theta)`` on
``x > 1``.  For each family this module provides the log-likelihood, the
closed-form maximum likelihood estimate, the divergence (negative
log-likelihood ratio against the best fitting model), the observed
information, and a seeded sampler.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import InvalidDataError, InvalidParameterError, MLEOutsideDomainError

# Open domains: a parameter must sit at least this far above the lower bound.
EDGE_MARGIN = 1e-12


class FamilyKind(enum.Enum):
    NORMAL = "normal"
    PARETO = "pareto"


class ParetoDomain(enum.Enum):
    THETA_POSITIVE = "theta>0"
    THETA_ABOVE_ONE = "theta>1"
    THETA_ABOVE = "theta>t"


class NormalParams(NamedTuple):
    mu: float
    sigma2: float


ParamPoint = Union[float, NormalParams]


@dataclass(frozen=True)
class ModelFamily:
    """A parametric family together with its (open) parameter domain.

    Use the :meth:`normal` and :meth:`pareto` constructors rather than the
    raw dataclass fields.
    """

    kind: FamilyKind
    pareto_domain: ParetoDomain | None = None
    theta_min: float = 0.0

    @classmethod
    def normal(cls) -> "ModelFamily":
        return cls(FamilyKind.NORMAL)

    @classmethod
    def pareto(cls, lower: float = 0.0) -> "ModelFamily":
        """Pareto family restricted to ``theta > lower``.

        ``lower=0`` and ``lower=1`` give the two standard domains; any other
        positive value gives the restricted domain ``theta > lower``.
        """
        lower = float(lower)
        if lower == 0.0:
            return cls(FamilyKind.PARETO, ParetoDomain.THETA_POSITIVE, 0.0)
        if not (lower > 0.0 and math.isfinite(lower)):
            raise InvalidParameterError(f"Pareto domain bound must be a positive number, got {lower}")
        if lower == 1.0:
            return cls(FamilyKind.PARETO, ParetoDomain.THETA_ABOVE_ONE, 1.0)
        return cls(FamilyKind.PARETO, ParetoDomain.THETA_ABOVE, lower)

    @classmethod
    def parse(cls, text: str) -> "ModelFamily":
        """Parse ``normal``, ``pareto`` or ``pareto:theta>T``."""
        spec = text.strip().lower().replace(" ", "")
        if spec == "normal":
            return cls.normal()
        if spec == "pareto":
            return cls.pareto(0.0)
        if spec.startswith("pareto:theta>"):
            try:
                lower = float(spec[len("pareto:theta>"):])
            except ValueError:
                raise InvalidParameterError(f"cannot parse family {text!r}") from None
            return cls.pareto(lower)
        raise InvalidParameterError(f"unknown family {text!r}")

    @property
    def is_pareto(self) -> bool:
        return self.kind is FamilyKind.PARETO

    @property
    def lower(self) -> float:
        """Lower edge of the Pareto domain (0 for the Normal variance)."""
        return self.theta_min

    def describe(self) -> str:
        if self.kind is FamilyKind.NORMAL:
            return "normal"
        return f"pareto:theta>{self.theta_min:g}"

    def in_domain(self, theta: float) -> bool:
        return bool(theta >= self.theta_min + EDGE_MARGIN) and math.isfinite(theta)

    def check_params(self, params) -> ParamPoint:
        """Return ``params`` in canonical form or raise InvalidParameterError."""
        if self.kind is FamilyKind.PARETO:
            try:
                theta = float(params)
            except (TypeError, ValueError):
                raise InvalidParameterError(f"Pareto parameter must be a real number, got {params!r}") from None
            if not self.in_domain(theta):
                raise InvalidParameterError(
                    f"theta={theta!r} outside the open domain theta > {self.theta_min:g}"
                )
            return theta
        try:
            mu, sigma2 = (float(v) for v in params)
        except (TypeError, ValueError):
            raise InvalidParameterError(f"Normal parameters must be (mu, sigma2), got {params!r}") from None
        if not (math.isfinite(mu) and math.isfinite(sigma2)):
            raise InvalidParameterError("Normal parameters must be finite")
        if not sigma2 >= EDGE_MARGIN:
            raise InvalidParameterError(f"sigma2={sigma2!r} must be strictly positive")
        return NormalParams(mu, sigma2)


@dataclass(frozen=True)
class Observations:
    """An ordered batch of real-valued samples."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(-1)
        if arr.size < 1:
            raise InvalidDataError("at least one observation is required")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise InvalidDataError(f"observation {bad[0] + 1} is not a finite number")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def check(self, family: ModelFamily) -> "Observations":
        if family.is_pareto:
            bad = np.flatnonzero(self.values <= 1.0)
            if bad.size:
                i = int(bad[0])
                raise InvalidDataError(
                    f"observation {i + 1} ({self.values[i]!r}) violates the Pareto support x > 1"
                )
        return self


def log_likelihood(family: ModelFamily, params, obs: Observations) -> float:
    """Sum of log densities of ``obs`` under ``params``."""
    params = family.check_params(params)
    obs.check(family)
    x = obs.values
    if family.is_pareto:
        theta = params
        return float(x.size * math.log(theta) - (1.0 + theta) * np.sum(np.log(x)))
    mu, sigma2 = params
    return float(-0.5 * x.size * math.log(2.0 * math.pi * sigma2) - np.sum((x - mu) ** 2) / (2.0 * sigma2))


def mle(family: ModelFamily, obs: Observations) -> ParamPoint:
    """Closed-form maximum likelihood estimate.

    Raises MLEOutsideDomainError (carrying the unconstrained value) for
    degenerate samples and for Pareto estimates outside a restricted domain.
    """
    obs.check(family)
    x = obs.values
    if family.is_pareto:
        sum_log = float(np.sum(np.log(x)))
        if not sum_log > 0.0:
            raise MLEOutsideDomainError("sum of log observations must be positive", math.inf)
        theta_hat = x.size / sum_log
        if not family.in_domain(theta_hat):
            raise MLEOutsideDomainError(
                f"MLE theta={theta_hat!r} lies outside theta > {family.theta_min:g}", theta_hat
            )
        return theta_hat
    if x.size < 2:
        raise MLEOutsideDomainError("the Normal MLE needs at least two observations", NormalParams(float(x[0]), 0.0))
    xbar = float(np.mean(x))
    sigma2 = float(np.mean((x - xbar) ** 2))
    if not sigma2 > 0.0:
        raise MLEOutsideDomainError("degenerate sample: all observations are equal", NormalParams(xbar, sigma2))
    return NormalParams(xbar, sigma2)


@dataclass(frozen=True)
class DivergenceProfile:
    """The fitted model plus everything needed to evaluate the divergence.

    ``mle`` is the reference point where the divergence vanishes.  It is the
    usual MLE unless the family domain excludes it, in which case it is the
    domain-constrained likelihood maximizer and ``constrained`` is set.
    """

    family: ModelFamily
    mle: ParamPoint
    n: int
    sum_log: float = math.nan
    xbar: float = math.nan
    sigma2hat: float = math.nan
    unconstrained_mle: ParamPoint | None = None
    constrained: bool = False
    info_at_mle: np.ndarray = field(default=None, repr=False)

    @property
    def alpha_curvature(self) -> np.ndarray:
        """Hessian of the divergence at the reference point (n times the information)."""
        return self.n * self.info_at_mle

    def alpha_theta(self, theta):
        """Vectorized Pareto divergence; no domain checks."""
        theta = np.asarray(theta, dtype=float)
        ref = self.mle
        theta_hat = self.unconstrained_mle
        step = (theta - ref) / ref
        if not self.constrained:
            out = self.n * (step - np.log1p(step))
        else:
            out = self.n * ((theta - ref) / theta_hat - np.log1p(step))
        return out if out.ndim else float(out)

    def alpha_sigma2(self, sigma2):
        """Variance part of the Normal divergence, i.e. its minimum over mu."""
        sigma2 = np.asarray(sigma2, dtype=float)
        t = self.sigma2hat / sigma2
        out = 0.5 * self.n * ((t - 1.0) - np.log1p(t - 1.0))
        return out if out.ndim else float(out)

    def alpha_normal(self, mu, sigma2):
        sigma2 = np.asarray(sigma2, dtype=float)
        mu = np.asarray(mu, dtype=float)
        out = self.alpha_sigma2(sigma2) + 0.5 * self.n * (self.xbar - mu) ** 2 / sigma2
        return out if np.ndim(out) else float(out)


def build_profile(family: ModelFamily, obs: Observations) -> DivergenceProfile:
    """Fit the model and return its divergence profile.

    For a restricted Pareto domain that excludes the unconstrained MLE, the
    reference point is moved to the domain edge (plus EDGE_MARGIN) and the
    profile is flagged as constrained.
    """
    obs.check(family)
    n = obs.n
    if family.is_pareto:
        sum_log = float(np.sum(np.log(obs.values)))
        theta_hat = n / sum_log
        try:
            ref = mle(family, obs)
            constrained = False
        except MLEOutsideDomainError as exc:
            if family.theta_min == 0.0 or not math.isfinite(exc.value):
                raise
            ref = family.theta_min + EDGE_MARGIN
            constrained = True
        info = np.array([[1.0 / ref**2]])
        return DivergenceProfile(
            family, ref, n, sum_log=sum_log, unconstrained_mle=theta_hat, constrained=constrained, info_at_mle=info
        )
    mu, s2 = mle(family, obs)
    info = np.diag([1.0 / s2, 1.0 / (2.0 * s2**2)])
    return DivergenceProfile(
        family, NormalParams(mu, s2), n, xbar=mu, sigma2hat=s2, unconstrained_mle=NormalParams(mu, s2), info_at_mle=info
    )


def divergence(profile: DivergenceProfile, params) -> float:
    """Negative log-likelihood ratio of ``params`` against the reference point."""
    params = profile.family.check_params(params)
    if profile.family.is_pareto:
        return profile.alpha_theta(params)
    return profile.alpha_normal(params.mu, params.sigma2)


def information(profile: DivergenceProfile) -> np.ndarray:
    """Per-observation observed information at the reference point.

    Multiply by ``profile.n`` (or use ``profile.alpha_curvature``) for the
    Hessian of the divergence.
    """
    return profile.info_at_mle.copy()


def pareto_inverse_cdf(u, theta):
    """Map uniforms on (0, 1) to Pareto(theta) draws via ``u**(-1/theta)``."""
    return np.power(u, -1.0 / theta)


def sample(family: ModelFamily, params, n: int, seed) -> Observations:
    """Draw ``n`` iid observations; deterministic given ``seed``.

    ``seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    params = family.check_params(params)
    if n < 1:
        raise InvalidParameterError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    if family.is_pareto:
        # 1 - random() lies in (0, 1]; draws that round to the support edge are redrawn.
        x = pareto_inverse_cdf(1.0 - rng.random(n), params)
        bad = x <= 1.0
        while bad.any():
            x[bad] = pareto_inverse_cdf(1.0 - rng.random(int(bad.sum())), params)
            bad = x <= 1.0
        return Observations(x)
    mu, sigma2 = params
    return Observations(rng.normal(mu, math.sqrt(sigma2), n))
