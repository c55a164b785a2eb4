import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from drrisk import ModelFamily, build_profile, sample

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pareto_profile(theta=2.0, n=200, seed=0, lower=0.0):
    family = ModelFamily.pareto(lower)
    return build_profile(family, sample(family, theta, n, np.random.SeedSequence([seed, n])))


def normal_profile(mu=0.0, sigma2=1.0, n=200, seed=0):
    family = ModelFamily.normal()
    return build_profile(family, sample(family, (mu, sigma2), n, np.random.SeedSequence([seed, n])))


@pytest.fixture
def pareto_factory():
    return pareto_profile


@pytest.fixture
def normal_factory():
    return normal_profile


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if rep.when == "call" and "criterion" in props:
                lines.append((props["criterion"], "PASS" if rep.passed else "FAIL", props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
