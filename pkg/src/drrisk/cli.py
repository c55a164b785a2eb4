"""Command-line interface.

Subcommands::

    drrisk estimate --family pareto:theta>1 --functional es --level 0.05 --input data.csv
    drrisk diagnose --family pareto --functional var --level 0.01 --delta 0.5 --input data.csv
    drrisk simulate --plan plan.ini
    drrisk sweep    --plan plan.ini

Reports are JSON on standard output (or ``--output``); diagnostics go to
standard error.  ``estimate`` and ``diagnose`` exit with 0 for a Regular
estimate, 2 for a computed but non-regular one, 3 for Unbounded and 1 on
input or configuration errors.  ``simulate`` and ``sweep`` exit with 0 when
every replication completed, 2 when some replications failed and 1 on plan
errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .asymptotics import expand
from .dataio import dumps, read_observations
from .engine import DREstimate, DRQuery, Verdict, dr_estimate, regularity_check
from .errors import DRError
from .harness import frontier_sweep, load_plan, parse_delta, parse_gamma, run_plan, sweep_summary
from .models import ModelFamily, NormalParams, build_profile
from .risk import RiskFunctional, is_unbounded

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NON_REGULAR = 2
EXIT_UNBOUNDED = 3

DIAGNOSE_DELTAS = (0.0, 0.25, 0.5, 0.75)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _gamma_arg(text):
    try:
        return parse_gamma(text)
    except (ValueError, DRError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _delta_arg(text):
    try:
        return parse_delta(text)
    except (ValueError, DRError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drrisk", description="Divergence-robust risk estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--output", "-o", help="write the JSON report here instead of standard output")
    common.add_argument("--seed", type=int, help="master seed (overrides the plan's master_seed)")

    query = _Parser(add_help=False)
    query.add_argument("--input", "-i", required=True, help="CSV file, one value per line, optional header 'x'")
    query.add_argument("--family", default="pareto", help="normal | pareto | pareto:theta>T (default: pareto)")
    query.add_argument("--functional", required=True, help="es, var, prob_loss, integrated_tail, cramer_lundberg, minmaxvar, linear")
    query.add_argument("--level", type=float, required=True, help="risk level beta")
    query.add_argument("--k", type=float, default=1.0, help="penalty scale (default 1)")
    query.add_argument("--gamma", type=_gamma_arg, default=1.0, help="penalty exponent, a number >= 1 or 'inf'")
    query.add_argument("--delta", type=_delta_arg, default=None, help="truncation exponent, a number >= 0 or 'none'")

    plan = _Parser(add_help=False)
    plan.add_argument("--plan", "-p", required=True, help="plan file (INI, [plan] section)")
    plan.add_argument("--workers", type=int, default=1, help="worker processes for replications")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("estimate", parents=[query, common], help="run one DR estimate")
    sub.add_parser("diagnose", parents=[query, common], help="regularity over a grid of truncation exponents")
    sub.add_parser("simulate", parents=[plan, common], help="run a Monte Carlo plan")
    sub.add_parser("sweep", parents=[plan, common], help="run a plan over the exponents in its p_grid")
    return parser


def _params_json(point):
    if point is None:
        return None
    if isinstance(point, NormalParams):
        return {"mu": point.mu, "sigma2": point.sigma2}
    return float(point)


def _number_or_none(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _query_json(query: DRQuery) -> dict:
    return {
        "functional": query.functional.id.value,
        "level": query.functional.level,
        "k": query.k,
        "gamma": query.gamma,
        "delta": query.delta,
    }


def _estimate_json(est: DREstimate) -> dict:
    regular, explanation = regularity_check(est)
    return {
        "value": math.inf if is_unbounded(est.value) else est.value,
        "argmax": _params_json(est.argmax),
        "alpha_at_argmax": _number_or_none(est.alpha_at_argmax),
        "verdict": est.verdict.value,
        "regular": regular,
        "explanation": explanation,
        "bound_used": est.bound_used,
    }


def _exit_code(est: DREstimate) -> int:
    if est.verdict is Verdict.REGULAR:
        return EXIT_OK
    if est.verdict is Verdict.UNBOUNDED:
        return EXIT_UNBOUNDED
    return EXIT_NON_REGULAR


def _load(args):
    family = ModelFamily.parse(args.family)
    functional = RiskFunctional.parse(args.functional, args.level)
    query = DRQuery(functional, args.k, args.gamma, args.delta)
    obs = read_observations(args.input, family)
    profile = build_profile(family, obs)
    return profile, query


def _header(profile) -> dict:
    return {
        "n": profile.n,
        "family": profile.family.describe(),
        "mle": _params_json(profile.mle),
        "constrained_mle": profile.constrained,
        "alpha_curvature": profile.alpha_curvature,
    }


def cmd_estimate(args) -> tuple[int, dict]:
    profile, query = _load(args)
    est = dr_estimate(profile, query)
    report = _header(profile)
    report["query"] = _query_json(query)
    report.update(_estimate_json(est))
    report["expansion"] = None
    if query.gamma == 1.0 or query.hard_constraint:
        try:
            exp = expand(profile, query.functional, query.k, query.gamma)
        except DRError:
            pass
        else:
            report["expansion"] = {
                "center": exp.center_value,
                "correction": exp.correction,
                "value": exp.value,
                "order": exp.order_claim.value,
                "local_variance": exp.V,
            }
    return _exit_code(est), report


def cmd_diagnose(args) -> tuple[int, dict]:
    profile, query = _load(args)
    deltas = list(DIAGNOSE_DELTAS)
    if query.delta not in deltas:
        deltas.append(query.delta)
    rows = []
    user_est = None
    for delta in deltas:
        q = DRQuery(query.functional, query.k, query.gamma, delta)
        est = dr_estimate(profile, q)
        row = {"delta": delta}
        row.update(_estimate_json(est))
        rows.append(row)
        if delta == query.delta:
            user_est = est
    report = _header(profile)
    report["query"] = _query_json(query)
    report["by_delta"] = rows
    report["regular_at_user_delta"] = user_est.is_regular
    return _exit_code(user_est), report


def _plan(args):
    plan, p_grid = load_plan(args.plan)
    if args.seed is not None:
        plan = replace(plan, master_seed=args.seed)
    return plan, p_grid


def cmd_simulate(args) -> tuple[int, dict]:
    plan, _ = _plan(args)
    report = run_plan(plan, workers=args.workers)
    return (EXIT_NON_REGULAR if report.failed else EXIT_OK), report.to_dict()


def cmd_sweep(args) -> tuple[int, dict]:
    plan, p_grid = _plan(args)
    reports = frontier_sweep(plan, p_grid, workers=args.workers)
    failed = sum(r.failed for r in reports)
    out = {"reports": [r.to_dict() for r in reports], "summary": sweep_summary(reports)}
    return (EXIT_NON_REGULAR if failed else EXIT_OK), out


COMMANDS = {"estimate": cmd_estimate, "diagnose": cmd_diagnose, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code, report = COMMANDS[args.command](args)
        text = dumps(report)
    except DRError as exc:
        print(f"drrisk {args.command}: error [{exc.tag}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output:
        try:
            Path(args.output).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"drrisk {args.command}: cannot write {args.output}: {exc.strerror}", file=sys.stderr)
            return EXIT_ERROR
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
