"""Monte Carlo experiments on regularity of DR estimates.

A plan fixes a true model, a functional whose level may move with the
sample size, and the DR query parameters.  For every sample size the plan
draws independent replications, runs :func:`drrisk.engine.dr_estimate` and
tallies how often the estimate is regular.

Replication ``j`` at size ``n`` is seeded from
``numpy.random.SeedSequence([master_seed, n, j])``, so results do not depend
on execution order and may be computed in parallel.
"""

from __future__ import annotations

import configparser
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .engine import DRQuery, Verdict, dr_estimate
from .errors import DRError, InvalidInputError
from .models import ModelFamily, build_profile, sample
from .risk import RiskFunctional, RiskId, is_unbounded, parse_risk_id

# Functionals whose level is a tail probability (shrinks with n); the rest are thresholds.
_TAIL_PROBABILITY = (RiskId.ES, RiskId.VAR)


class BetaRuleKind(enum.Enum):
    FIXED = "fixed"
    POWER = "power"
    OFFSET_POWER = "offset_power"


@dataclass(frozen=True)
class BetaRule:
    """How the risk level depends on the sample size.

    * fixed: ``beta``
    * power: ``c * n**-p`` for ES/VaR, ``c * n**p`` for threshold functionals
    * offset_power: ``1/theta_tilde + c * n**-p`` (minmaxvar)
    """

    kind: BetaRuleKind
    beta: float = math.nan
    c: float = 1.0
    p: float = 0.0
    theta_tilde: float = math.nan

    @classmethod
    def fixed(cls, beta):
        return cls(BetaRuleKind.FIXED, beta=float(beta))

    @classmethod
    def power(cls, c, p):
        return cls(BetaRuleKind.POWER, c=float(c), p=float(p))

    @classmethod
    def offset_power(cls, theta_tilde, c, p):
        return cls(BetaRuleKind.OFFSET_POWER, c=float(c), p=float(p), theta_tilde=float(theta_tilde))

    def level(self, n: int, functional: RiskId) -> float:
        if self.kind is BetaRuleKind.FIXED:
            return self.beta
        if self.kind is BetaRuleKind.OFFSET_POWER:
            return 1.0 / self.theta_tilde + self.c * float(n) ** (-self.p)
        sign = -1.0 if functional in _TAIL_PROBABILITY else 1.0
        return self.c * float(n) ** (sign * self.p)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is BetaRuleKind.FIXED:
            out["beta"] = self.beta
        else:
            out.update(c=self.c, p=self.p)
            if self.kind is BetaRuleKind.OFFSET_POWER:
                out["theta_tilde"] = self.theta_tilde
        return out


@dataclass(frozen=True)
class ExperimentPlan:
    family: ModelFamily
    true_params: object
    n_grid: tuple
    beta_rule: BetaRule
    functional: RiskId
    k: float = 1.0
    gamma: float = 1.0
    delta: float | None = None
    replications: int = 100
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "true_params", self.family.check_params(self.true_params))
        if not self.n_grid:
            raise InvalidInputError("n_grid must not be empty")
        if any(n < 1 for n in self.n_grid) or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise InvalidInputError(f"n_grid must be strictly increasing positive counts, got {list(self.n_grid)}")
        if self.replications < 1:
            raise InvalidInputError("replications must be at least 1")
        for n in self.n_grid:
            # Raises for levels outside the functional's range.
            self.query(n)

    def query(self, n: int) -> DRQuery:
        level = self.beta_rule.level(n, self.functional)
        return DRQuery(RiskFunctional(self.functional, level), self.k, self.gamma, self.delta)

    def to_dict(self) -> dict:
        params = self.true_params
        return {
            "family": self.family.describe(),
            "true_params": list(params) if isinstance(params, tuple) else params,
            "functional": self.functional.value,
            "beta_rule": self.beta_rule.to_dict(),
            "k": self.k,
            "gamma": self.gamma,
            "delta": self.delta,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class Replication:
    index: int
    verdict: str | None
    value: float | None
    alpha_ratio: float | None
    error: str | None = None


@dataclass
class FrontierRow:
    n: int
    beta: float
    replications: int
    regular: int
    regular_fraction: float
    mean_value_regular: float | None
    mean_alpha_ratio: float | None
    verdict_counts: dict
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "replications": self.replications,
            "regular": self.regular,
            "regular_fraction": self.regular_fraction,
            "mean_value_regular": self.mean_value_regular,
            "mean_alpha_over_bound": self.mean_alpha_ratio,
            "verdict_counts": dict(self.verdict_counts),
            "failed_replications": [{"replication": j, "error": tag} for j, tag in self.failures],
        }


@dataclass
class FrontierReport:
    rows: list
    metadata: dict

    @property
    def failed(self) -> int:
        return sum(len(r.failures) for r in self.rows)

    def row(self, n: int) -> FrontierRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [r.to_dict() for r in self.rows]}


def replication_seed(master_seed: int, n: int, j: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(n), int(j)])


def run_replication(plan: ExperimentPlan, n: int, j: int) -> Replication:
    query = plan.query(n)
    try:
        obs = sample(plan.family, plan.true_params, n, replication_seed(plan.master_seed, n, j))
        profile = build_profile(plan.family, obs)
        est = dr_estimate(profile, query)
    except DRError as exc:
        return Replication(j, None, None, None, exc.tag)
    except (ArithmeticError, FloatingPointError) as exc:
        return Replication(j, None, None, None, type(exc).__name__)
    if is_unbounded(est.value):
        return Replication(j, est.verdict.value, None, None)
    ratio = est.alpha_at_argmax / est.bound_used
    return Replication(j, est.verdict.value, float(est.value), float(ratio))


def _run_task(args):
    return run_replication(*args)


def _summarize(n: int, beta: float, reps: list) -> FrontierRow:
    counts = {v.value: 0 for v in Verdict}
    failures = []
    regular_values, ratios = [], []
    for rep in reps:
        if rep.error is not None:
            failures.append((rep.index, rep.error))
            continue
        counts[rep.verdict] += 1
        if rep.alpha_ratio is not None:
            ratios.append(rep.alpha_ratio)
        if rep.verdict == Verdict.REGULAR.value:
            regular_values.append(rep.value)
    regular = counts[Verdict.REGULAR.value]
    return FrontierRow(
        n=n,
        beta=beta,
        replications=len(reps),
        regular=regular,
        regular_fraction=regular / len(reps),
        mean_value_regular=float(np.mean(regular_values)) if regular_values else None,
        mean_alpha_ratio=float(np.mean(ratios)) if ratios else None,
        verdict_counts=counts,
        failures=failures,
    )


def run_plan(plan: ExperimentPlan, workers: int = 1) -> FrontierReport:
    """Run every replication of the plan and tally regular verdicts per n.

    Failed replications count as non-regular and are listed with their
    error tag.
    """
    tasks = [(plan, n, j) for n in plan.n_grid for j in range(plan.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_task(t) for t in tasks]
    rows = []
    for i, n in enumerate(plan.n_grid):
        reps = results[i * plan.replications : (i + 1) * plan.replications]
        rows.append(_summarize(n, plan.query(n).functional.level, reps))
    rows.sort(key=lambda r: (r.n, r.beta))
    meta = {"plan": plan.to_dict(), "seed_scheme": "SeedSequence([master_seed, n, replication])"}
    return FrontierReport(rows, meta)


def frontier_sweep(base_plan: ExperimentPlan, p_grid, workers: int = 1) -> list:
    """Run ``base_plan`` once per exponent, with the level rule's exponent replaced."""
    reports = []
    for p in p_grid:
        rule = base_plan.beta_rule
        if rule.kind is BetaRuleKind.OFFSET_POWER:
            rule = BetaRule.offset_power(rule.theta_tilde, rule.c, p)
        else:
            c = rule.beta if rule.kind is BetaRuleKind.FIXED else rule.c
            rule = BetaRule.power(c, p)
        report = run_plan(replace(base_plan, beta_rule=rule), workers=workers)
        report.metadata["p"] = float(p)
        reports.append(report)
    return reports


def sweep_summary(reports: list) -> list:
    """regular_fraction by (p, n) as plot-ready rows."""
    return [
        {"p": rep.metadata.get("p"), "n": row.n, "beta": row.beta, "regular_fraction": row.regular_fraction}
        for rep in reports
        for row in rep.rows
    ]


# ---------------------------------------------------------------------------
# Plan files
#
# INI format with a single [plan] section:
#
#   [plan]
#   family = pareto:theta>1        ; normal | pareto | pareto:theta>T
#   theta = 2                      ; or: mu = 0 / sigma2 = 1 for normal
#   functional = es                ; es var prob_loss integrated_tail cramer_lundberg minmaxvar linear
#   beta_rule = power              ; fixed | power | offset_power
#   beta = 0.1                     ; fixed rule
#   c = 1                          ; power rules
#   p = 0.5                        ; power rules
#   theta_tilde = 1.5              ; offset_power rule
#   k = 1
#   gamma = 1                      ; number or inf
#   delta = 0.5                    ; number or none
#   n_grid = 500, 2000
#   reps = 200
#   master_seed = 7
#   p_grid = 0.5, 3.0              ; sweeps only


def parse_gamma(text: str) -> float:
    text = str(text).strip().lower()
    if text in ("inf", "+inf", "infinity"):
        return math.inf
    value = float(text)
    if not value >= 1.0:
        raise InvalidInputError(f"gamma must be >= 1 or 'inf', got {text!r}")
    return value


def parse_delta(text: str) -> float | None:
    text = str(text).strip().lower()
    if text == "none":
        return None
    value = float(text)
    if not (value >= 0.0 and math.isfinite(value)):
        raise InvalidInputError(f"delta must be >= 0 or 'none', got {text!r}")
    return value


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


def load_plan(path) -> tuple:
    """Read a plan file; returns ``(plan, p_grid)`` where p_grid may be empty."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(Path(path), encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read plan file {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise InvalidInputError(f"malformed plan file {path}: {exc}") from None
    if "plan" not in parser:
        raise InvalidInputError("plan file needs a [plan] section")
    sec = parser["plan"]
    try:
        family = ModelFamily.parse(sec.get("family", "pareto"))
        if family.is_pareto:
            true_params = sec.getfloat("theta")
        else:
            true_params = (sec.getfloat("mu", 0.0), sec.getfloat("sigma2", 1.0))
        rid = parse_risk_id(sec["functional"])
        kind = BetaRuleKind(sec.get("beta_rule", "fixed").strip().lower())
        if kind is BetaRuleKind.FIXED:
            rule = BetaRule.fixed(sec.getfloat("beta"))
        elif kind is BetaRuleKind.POWER:
            rule = BetaRule.power(sec.getfloat("c", 1.0), sec.getfloat("p"))
        else:
            rule = BetaRule.offset_power(sec.getfloat("theta_tilde"), sec.getfloat("c", 1.0), sec.getfloat("p"))
        n_grid = [int(v) for v in _floats(sec.get("n_grid", ""))]
        plan = ExperimentPlan(
            family=family,
            true_params=true_params,
            n_grid=tuple(n_grid),
            beta_rule=rule,
            functional=rid,
            k=sec.getfloat("k", 1.0),
            gamma=parse_gamma(sec.get("gamma", "1")),
            delta=parse_delta(sec.get("delta", "none")),
            replications=sec.getint("reps", 100),
            master_seed=sec.getint("master_seed", 0),
        )
        p_grid = _floats(sec.get("p_grid", ""))
    except KeyError as exc:
        raise InvalidInputError(f"plan file is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DRError):
            raise
        raise InvalidInputError(f"bad value in plan file: {exc}") from None
    return plan, p_grid
