"""Acceptance suite: one test per criterion.

Each test records its measured quantities; the terminal summary prints one
PASS/FAIL line per criterion.  Monte Carlo plans use master seed 2718.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from drrisk import (
    BetaRule,
    DRQuery,
    ExperimentPlan,
    ModelFamily,
    Observations,
    RiskFunctional,
    RiskId,
    Verdict,
    build_profile,
    dr_estimate,
    expand,
    expectation_oracle,
    gamma_transfer_check,
    information,
    mle,
    normal_extremum_approx,
    risk_value,
    run_plan,
    sample,
)
from drrisk.risk import PARETO_IDS

SEED = 2718
P0 = ModelFamily.pareto()
P1 = ModelFamily.pareto(1.0)
NORMAL = ModelFamily.normal()


@pytest.fixture
def criterion(record_property):
    def record(number, detail):
        record_property("criterion", number)
        record_property("detail", detail)

    return record


def seeded(*key):
    return np.random.SeedSequence([SEED, *key])


def test_criterion_01_closed_forms(criterion):
    checks = []
    obs = Observations([math.e, math.e**2, math.e**3])
    checks.append((mle(P0, obs), 0.5))
    prof = build_profile(P0, Observations(np.exp(np.linspace(0.2, 3.0, 10))))
    checks.append((prof.alpha_theta(2 * prof.mle), 3.0685281944005469))  # 10 (1 - log 2)
    checks.append((prof.alpha_theta(0.5 * prof.mle), 10 * (math.log(2) - 0.5)))
    prof = build_profile(P0, Observations(np.full(100, math.e)))
    checks.append((prof.alpha_theta(1.5), 100 * (-math.log(1.5) + 0.5)))
    worst = max(abs(a - b) / abs(b) for a, b in checks)
    criterion(1, f"closed-form exactness, worst relative error {worst:.1e} (tol 1e-12)")
    assert worst <= 1e-12


def test_criterion_02_divergence_properties(criterion):
    worst_zero = worst_neg = worst_conv = worst_slope = 0.0
    quad_ok = True
    for family in (P0, NORMAL):
        for s in range(100):
            truth = 2.0 if family.is_pareto else (0.0, 1.0)
            prof = build_profile(family, sample(family, truth, 100, seeded(2, s)))
            if family.is_pareto:
                t = prof.mle
                grid = np.linspace(1e-3, 6 * t, 1000)
                a = prof.alpha_theta(grid)
                worst_zero = max(worst_zero, abs(prof.alpha_theta(t)))
                worst_neg = max(worst_neg, -a.min())
                worst_conv = max(worst_conv, -np.diff(a, 2).min())
                h = 1e-6 * t
                slope = (prof.alpha_theta(t + h) - prof.alpha_theta(t - h)) / (2 * h)
                worst_slope = max(worst_slope, abs(slope) / prof.n)
                info = information(prof)[0, 0]

                def ratio(psi):
                    return np.abs(prof.alpha_theta(t + psi) - 0.5 * prof.n * info * psi**2) / (np.abs(psi) ** 3 * prof.n)

                coarse = np.r_[-np.linspace(0.01, 0.1, 10), np.linspace(0.01, 0.1, 10)]
                fine = np.r_[-np.geomspace(1e-4, 0.1, 500), np.geomspace(1e-4, 0.1, 500)]
                quad_ok &= bool(np.all(ratio(fine) <= 1.5 * ratio(coarse).max()))
            else:
                m, v = prof.xbar, prof.sigma2hat
                mu = np.linspace(m - 2, m + 2, 40)[:, None]
                s2 = np.geomspace(v / 10, v * 10, 25)[None, :]
                a = prof.alpha_normal(mu, s2)
                worst_zero = max(worst_zero, abs(prof.alpha_normal(m, v)))
                worst_neg = max(worst_neg, -a.min())
                # Convex in mu for fixed sigma2 and in sigma2 near the MLE.
                worst_conv = max(worst_conv, -np.diff(prof.alpha_normal(np.linspace(m - 1, m + 1, 200), v), 2).min())
                near = np.linspace(0.8 * v, 1.2 * v, 200)
                worst_conv = max(worst_conv, -np.diff(prof.alpha_sigma2(near), 2).min())
                h = 1e-6
                g = [(prof.alpha_normal(m + h, v) - prof.alpha_normal(m - h, v)) / (2 * h),
                     (prof.alpha_normal(m, v + h) - prof.alpha_normal(m, v - h)) / (2 * h)]
                worst_slope = max(worst_slope, max(abs(x) for x in g) / prof.n)
                info = information(prof)
                rng = np.random.default_rng(s)

                def ball(k, rmin):
                    d = rng.normal(size=(k, 2))
                    d /= np.linalg.norm(d, axis=1)[:, None]
                    return d * rng.uniform(rmin, 0.1, size=(k, 1))

                def nratio(psi):
                    val = prof.alpha_normal(m + psi[:, 0], v + psi[:, 1])
                    quad = 0.5 * prof.n * np.einsum("ij,jk,ik->i", psi, info, psi)
                    return np.abs(val - quad) / (np.linalg.norm(psi, axis=1) ** 3 * prof.n)

                quad_ok &= bool(np.all(nratio(ball(500, 1e-3)) <= 1.5 * nratio(ball(50, 0.02)).max()))
    ok = worst_zero <= 1e-10 and worst_neg <= 0.0 and worst_conv <= 1e-8 and worst_slope <= 1e-6 and quad_ok
    criterion(
        2,
        f"divergence properties on 2x100 samples: |alpha(mle)| {worst_zero:.1e}, min alpha {-worst_neg:.1e}, "
        f"convexity defect {worst_conv:.1e}, slope/n {worst_slope:.1e}, cubic remainder bound {'held' if quad_ok else 'broken'}",
    )
    assert ok


def _random_pair(rid, rng):
    if rid is RiskId.ES:
        return rng.uniform(1.05, 6.0), 10 ** rng.uniform(-6, -0.05)
    if rid is RiskId.VAR:
        return rng.uniform(0.3, 6.0), 10 ** rng.uniform(-6, -0.05)
    if rid is RiskId.MINMAXVAR:
        theta = rng.uniform(1.05, 6.0)
        return theta, rng.uniform(1.02 / theta, 1.0)
    theta = rng.uniform(0.3, 6.0) if rid is RiskId.PROB_LOSS else rng.uniform(1.05, 6.0)
    return theta, 10 ** rng.uniform(0.0, 4.0)


def test_criterion_03_oracle_equivalence(criterion):
    rng = np.random.default_rng(SEED)
    worst, es_below_var = 0.0, 0
    for rid in PARETO_IDS:
        family = P0 if rid in (RiskId.VAR, RiskId.PROB_LOSS) else P1
        for _ in range(200):
            theta, beta = _random_pair(rid, rng)
            f = RiskFunctional(rid, beta)
            value = risk_value(f, family, theta)
            worst = max(worst, abs(value - expectation_oracle(family, theta, f)) / max(1.0, abs(value)))
            if rid in (RiskId.ES, RiskId.VAR) and theta > 1.0:
                other = RiskId.VAR if rid is RiskId.ES else RiskId.ES
                pair = {rid: value, other: risk_value(RiskFunctional(other, beta), P1, theta)}
                es_below_var += pair[RiskId.ES] < pair[RiskId.VAR]
    criterion(3, f"oracle equivalence on 6x200 pairs, worst scaled error {worst:.1e} (tol 1e-6); ES < VaR cases {es_below_var}")
    assert worst <= 1e-6 and es_below_var == 0


def test_criterion_04_unboundedness(criterion):
    cases = [
        (RiskFunctional(RiskId.ES, 0.05), P1),
        (RiskFunctional(RiskId.VAR, 0.05), P0),
        (RiskFunctional(RiskId.INTEGRATED_TAIL, 10.0), P1),
        (RiskFunctional(RiskId.MINMAXVAR, 0.6), P1),
    ]
    total = misses = 0
    for f, family in cases:
        for s in range(50):
            prof = build_profile(family, sample(family, 2.0, 100, seeded(4, s)))
            for k in (0.5, 1.0, 2.0):
                for gamma in (1.0, 2.0):
                    est = dr_estimate(prof, DRQuery(f, k=k, gamma=gamma))
                    total += 1
                    misses += est.verdict is not Verdict.UNBOUNDED
    criterion(4, f"untruncated ES/VaR/IT/minmaxvar: {total - misses}/{total} Unbounded")
    assert misses == 0


def test_criterion_05_bounded_functional(criterion):
    total = irregular = 0
    worst = 0.0
    for n in (10, 50, 1000):
        for s in range(5):
            prof = build_profile(P0, sample(P0, 2.0, n, seeded(5, n, s)))
            for beta in (2.0, 10.0, 100.0, 1e6):
                f = RiskFunctional(RiskId.PROB_LOSS, beta)
                for gamma in (1.0, 2.0, math.inf):
                    plain = dr_estimate(prof, DRQuery(f, gamma=gamma))
                    total += 1
                    irregular += not plain.is_regular
                    for delta in (0.25, 0.5):
                        trunc = dr_estimate(prof, DRQuery(f, gamma=gamma, delta=delta))
                        total += 1
                        irregular += not trunc.is_regular
                        worst = max(worst, abs(trunc.value - plain.value) / abs(plain.value))
    criterion(5, f"ProbLoss: {total - irregular}/{total} Regular; truncated vs untruncated worst relative gap {worst:.1e} (tol 1e-10)")
    assert irregular == 0 and worst <= 1e-10


def test_criterion_06_hard_constraint_endpoint(criterion):
    beta, worst, used, s = 0.05, 0.0, 0, 0
    while used < 50:
        obs = sample(P1, 2.0, 200, seeded(6, s))
        s += 1
        n, theta_hat = obs.n, obs.n / np.sum(np.log(obs.values))

        def excess(t):
            return n * (-math.log(t / theta_hat) - 1 + t / theta_hat) - 1.0

        if excess(1.0 + 1e-9) <= 0:
            continue
        t_star = brentq(excess, 1.0 + 1e-9, theta_hat, xtol=1e-15, rtol=1e-15)
        used += 1
        est = dr_estimate(build_profile(P1, obs), DRQuery(RiskFunctional(RiskId.ES, beta), k=1.0, gamma=math.inf))
        ref = t_star / (t_star - 1) * beta ** (-1 / t_star)
        worst = max(worst, abs(est.value - ref) / ref)
    criterion(6, f"gamma=inf DR-ES vs bisected endpoint formula on 50 samples, worst relative error {worst:.1e} (tol 1e-8)")
    assert worst <= 1e-8


def test_criterion_07_gamma_transfer(criterion):
    rng = np.random.default_rng(SEED)
    tested = skipped = violations = 0
    while tested < 100:
        n = int(rng.choice([100, 500, 2000]))
        q = DRQuery(
            RiskFunctional(RiskId.ES, float(10 ** rng.uniform(-3, -0.5))),
            k=float(rng.choice([0.5, 1.0, 2.0, 4.0])),
            gamma=1.0,
            delta=float(rng.choice([0.25, 0.5, 0.75])),
        )
        prof = build_profile(P1, sample(P1, 2.0, n, seeded(7, tested + skipped)))
        rep = gamma_transfer_check(prof, q, [2.0, 4.0])
        if rep.skipped:
            skipped += 1
            continue
        tested += 1
        violations += len(rep.violations)
    criterion(7, f"gamma transfer on {tested} qualifying queries ({skipped} skipped): {violations} violations")
    assert violations == 0


def test_criterion_08_expansion_rates(criterion):
    start = time.perf_counter()
    f = RiskFunctional(RiskId.PROB_LOSS, 5.0)
    results = {}
    for gamma, power in ((1.0, 1.5), (math.inf, 0.75)):
        medians = []
        for n in (200, 800, 3200):
            errs = []
            for s in range(50):
                prof = build_profile(P0, sample(P0, 2.0, n, seeded(8, n, s)))
                est = dr_estimate(prof, DRQuery(f, k=1.0, gamma=gamma))
                errs.append(n**power * abs(est.value - expand(prof, f, 1.0, gamma).value))
            medians.append(float(np.median(errs)))
        results[gamma] = medians
    elapsed = time.perf_counter() - start
    ratios = {g: m[2] / m[0] for g, m in results.items()}
    criterion(
        8,
        f"scaled-error median ratio n=3200/n=200: gamma=1 {ratios[1.0]:.2f}, gamma=inf {ratios[math.inf]:.2f} "
        f"(limit 4); {elapsed:.1f}s",
    )
    assert all(r <= 4.0 for r in ratios.values()) and elapsed <= 300


def test_criterion_09_normal_extremum(criterion):
    worst_mu = worst_s2 = 0.0
    for n in (1000, 10_000):
        for s in range(20):
            prof = build_profile(NORMAL, sample(NORMAL, (0.0, 1.0), n, seeded(9, n, s)))
            est = dr_estimate(prof, DRQuery(RiskFunctional(RiskId.LINEAR_PAYOFF, 1.0), k=1.0, gamma=1.0, delta=0.5))
            mu, s2 = normal_extremum_approx(prof.xbar, prof.sigma2hat, 1.0, 1.0, n)
            worst_mu = max(worst_mu, abs(est.argmax.mu - mu) * n**1.5 / 10)
            worst_s2 = max(worst_s2, abs(est.argmax.sigma2 - s2) * n**2 / 10)
    criterion(9, f"Normal argmax vs closed-form extremum: worst share of tolerance mu {worst_mu:.1e}, sigma2 {worst_s2:.1e}")
    assert worst_mu <= 1.0 and worst_s2 <= 1.0


def _plan(**kw):
    base = dict(family=P1, true_params=2.0, k=1.0, gamma=1.0, delta=0.5, replications=200, master_seed=SEED)
    base.update(kw)
    return run_plan(ExperimentPlan(**base))


def test_criterion_10_frontiers(criterion):
    start = time.perf_counter()
    parts = {}
    es = _plan(n_grid=(500, 2000), beta_rule=BetaRule.power(1.0, 0.5), functional=RiskId.ES)
    parts["ES sub-critical n=2000"] = (es.row(2000).regular_fraction, es.row(2000).regular_fraction >= 0.95)
    var = _plan(family=P0, n_grid=(500, 2000), beta_rule=BetaRule.fixed(0.01), functional=RiskId.VAR)
    parts["VaR fixed n=2000"] = (var.row(2000).regular_fraction, var.row(2000).regular_fraction >= 0.95)
    it = _plan(n_grid=(100, 400), beta_rule=BetaRule.power(1.0, 10.0), functional=RiskId.INTEGRATED_TAIL)
    it_fracs = [r.regular_fraction for r in it.rows]
    parts["IT beta=n^10 n=100,400"] = (it_fracs, all(f == 1.0 for f in it_fracs))
    mmv = _plan(
        family=ModelFamily.pareto(1.5), n_grid=(500, 2000, 8000),
        beta_rule=BetaRule.offset_power(1.5, 1.0, 0.125), functional=RiskId.MINMAXVAR,
    )
    mmv_fracs = [r.regular_fraction for r in mmv.rows]
    parts["minmaxvar offset"] = (mmv_fracs, mmv_fracs[-1] >= 0.9 and mmv_fracs == sorted(mmv_fracs))
    bad = _plan(n_grid=(500, 2000, 8000), beta_rule=BetaRule.fixed(0.6), functional=RiskId.MINMAXVAR)
    bad_fracs = [1.0 - r.regular_fraction for r in bad.rows]
    parts["minmaxvar beta=0.6 non-regular"] = (bad_fracs, all(f >= 0.5 for f in bad_fracs))
    sub = _plan(n_grid=(500, 2000), beta_rule=BetaRule.power(1.0, 0.5), functional=RiskId.ES)
    sup = _plan(n_grid=(500, 2000), beta_rule=BetaRule.power(1.0, 3.0), functional=RiskId.ES)
    pairs = [(a.regular_fraction, b.regular_fraction) for a, b in zip(sub.rows, sup.rows)]
    parts["ES p=0.5 vs p=3"] = (pairs, all(a >= b for a, b in pairs))
    elapsed = time.perf_counter() - start
    failed = [name for name, (_, ok) in parts.items() if not ok]
    detail = "; ".join(f"{name} {value}" for name, (value, _) in parts.items())
    criterion(10, f"{detail}; {elapsed:.0f}s" + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert not failed and elapsed <= 600


PLAN = """\
[plan]
family = pareto:theta>1
theta = 2
functional = es
beta_rule = power
c = 1
p = 0.5
gamma = 1
delta = 0.5
n_grid = 200, 800
reps = 30
master_seed = 2718
p_grid = 0.5, 3.0
"""


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "drrisk.cli", *map(str, args)], capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_criterion_11_determinism_and_interfaces(criterion, tmp_path):
    plan = tmp_path / "plan.ini"
    plan.write_text(PLAN)
    empty = tmp_path / "empty.ini"
    empty.write_text(PLAN.replace("n_grid = 200, 800", "n_grid ="))
    data = tmp_path / "data.csv"
    data.write_text("x\n" + "\n".join(repr(float(v)) for v in sample(P1, 2.0, 400, seeded(11)).values) + "\n")
    small = tmp_path / "small.csv"
    small.write_text("\n".join(repr(float(v)) for v in sample(P1, 2.0, 50, seeded(11, 1)).values) + "\n")
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n2.0\n0.5\n")

    runs = [_cli("sweep", "--plan", plan)[1] for _ in range(2)] + [_cli("sweep", "--plan", plan, "--workers", 2)[1]]
    estimates = [_cli("estimate", "--functional", "var", "--level", 0.01, "--delta", 0.5, "--input", data)[1] for _ in range(2)]
    identical = runs[0] == runs[1] == runs[2] and estimates[0] == estimates[1] and bool(runs[0])
    from drrisk.dataio import dumps

    roundtrip = dumps(json.loads(runs[0])) == runs[0]

    q = ["--input", data]
    matrix = [
        (3, ["estimate", "--family", "pareto:theta>1", "--functional", "es", "--level", 0.05, *q]),
        (0, ["estimate", "--functional", "prob_loss", "--level", 10, "--k", 1, "--gamma", 1, "--delta", "none", *q]),
        (0, ["estimate", "--functional", "prob_loss", "--level", 10, "--gamma", "inf", *q]),
        (2, ["estimate", "--family", "pareto:theta>1", "--functional", "es", "--level", 1e-12, "--delta", 0, "--input", small]),
        (1, ["estimate", "--functional", "es", "--level", 0.05, "--input", bad]),
        (1, ["estimate", "--functional", "es", "--level", 0.05, "--input", tmp_path / "missing.csv"]),
        (1, ["estimate", "--functional", "es", "--level", 0.05, "--gamma", "0.5", *q]),
        (1, ["estimate", "--functional", "es", "--level", 0.05, "--delta", "x", *q]),
        (1, ["estimate", "--functional", "es", "--level", 1.5, *q]),
        (0, ["diagnose", "--family", "pareto:theta>1", "--functional", "var", "--level", 0.01, "--delta", 0.5, *q]),
        (0, ["simulate", "--plan", plan]),
        (0, ["sweep", "--plan", plan]),
        (1, ["sweep", "--plan", empty]),
        (1, ["sweep", "--plan", tmp_path / "missing.ini"]),
        (1, ["estimate"]),
    ]
    mismatches = []
    for expected, args in matrix:
        code, out, err = _cli(*args)
        if code != expected or (code == 1 and (out or not err)) or "NaN" in out:
            mismatches.append((args[0], expected, code))
    criterion(
        11,
        f"byte-identical repeats {'yes' if identical else 'no'}, JSON round-trip {'yes' if roundtrip else 'no'}, "
        f"exit-code matrix {len(matrix) - len(mismatches)}/{len(matrix)}",
    )
    assert identical and roundtrip and not mismatches
