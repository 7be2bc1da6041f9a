"""Command-line interface.

Subcommands map one-to-one onto the library surface:

* ``run``          execute an experiment plan, persist record + CSVs + figures
* ``compare``      run a multi-config plan and print the comparison table
* ``budget``       evaluate the constants/budget formulas, print JSON
* ``probe``        minibatch / variance-reduced gradient variance probes
* ``gibbs-check``  chain law vs quadrature Gibbs table
* ``certify``      cross-check an objective's certificate

Failures exit nonzero with a machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import theory
from .benchmarks import random_instance
from .dynamics import gld_samples
from .harness import (
    OUTPUT_DIR_ENV,
    PlanValidationError,
    compare_algorithms,
    parse_plan,
    render_comparison_table,
    run_plan,
)
from .objectives import certify, objective_from_json

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langevinlab",
        description="Langevin dynamics samplers with certified benchmarks and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment plan")
    p_run.add_argument("--plan", required=True, help="path to the plan JSON")
    p_run.add_argument("--out", default=None, help=f"output directory (or ${OUTPUT_DIR_ENV})")
    p_run.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_cmp = sub.add_parser("compare", help="run a multi-config plan and print the comparison")
    p_cmp.add_argument("--plan", required=True)
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--no-figures", action="store_true")

    p_budget = sub.add_parser("budget", help="evaluate constants and step budgets")
    p_budget.add_argument("--epsilon", type=float, required=True)
    p_budget.add_argument("--config", required=True, help="TheoryParams JSON file (may carry n)")
    p_budget.add_argument("--n", type=int, default=None, help="component count (overrides config)")
    p_budget.add_argument("--step-size", type=float, default=None)

    p_probe = sub.add_parser("probe", help="minibatch variance probes")
    p_probe.add_argument("--objective", default=None, help="objective JSON file")
    p_probe.add_argument("--family", default="quadratic", choices=["quadratic", "cosine"])
    p_probe.add_argument("--n", type=int, default=6)
    p_probe.add_argument("--dim", type=int, default=1)
    p_probe.add_argument("--batch", type=int, required=True)
    p_probe.add_argument("--mode", default="exhaustive", choices=["exhaustive", "montecarlo"])
    p_probe.add_argument("--draws", type=int, default=10_000)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.add_argument("--point", default=None, help="comma-separated evaluation point")
    p_probe.add_argument(
        "--kind", default="minibatch", choices=["minibatch", "vr"], help="which probe to run"
    )
    p_probe.add_argument("--snapshot", default=None, help="comma-separated snapshot (vr probe)")

    p_gibbs = sub.add_parser("gibbs-check", help="chain law vs quadrature Gibbs table")
    p_gibbs.add_argument("--objective", required=True)
    p_gibbs.add_argument("--beta", type=float, required=True)
    p_gibbs.add_argument("--eta", type=float, default=1e-3, help="step size")
    p_gibbs.add_argument("--steps", type=int, default=1_000_000)
    p_gibbs.add_argument("--burn-in-fraction", type=float, default=0.1)
    p_gibbs.add_argument("--thin", type=int, default=1)
    p_gibbs.add_argument("--points-per-axis", type=int, default=128)
    p_gibbs.add_argument("--seed", type=int, default=0)
    p_gibbs.add_argument("--out", default=None, help="write density CSV + figure here")
    p_gibbs.add_argument("--no-figures", action="store_true")

    p_cert = sub.add_parser("certify", help="cross-check an objective certificate")
    p_cert.add_argument("--objective", required=True)
    p_cert.add_argument("--radius", type=float, default=None)
    p_cert.add_argument("--samples", type=int, default=2000)
    p_cert.add_argument("--seed", type=int, default=0)
    p_cert.add_argument(
        "--strict", action="store_true", help="exit 2 when any violation is reported"
    )
    return parser


def _load_objective(path: str):
    return objective_from_json(Path(path).read_text(encoding="utf-8"))


def _parse_vector(text, dim):
    vec = np.asarray([float(v) for v in text.split(",")], dtype=float)
    if vec.shape != (dim,):
        raise ValueError(f"expected {dim} comma-separated values, got {vec.shape[0]}")
    return vec


def _cmd_run(args) -> int:
    plan = parse_plan(Path(args.plan).read_text(encoding="utf-8"))
    record = run_plan(plan, out_dir=args.out, figures=not args.no_figures)
    print(record.to_json())
    return 0


def _cmd_compare(args) -> int:
    plan = parse_plan(Path(args.plan).read_text(encoding="utf-8"))
    record = run_plan(plan, out_dir=args.out, figures=not args.no_figures)
    rows = record.record.get("comparison") or compare_algorithms(record.record)
    print(render_comparison_table(rows))
    return 0


def _cmd_budget(args) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    n = args.n if args.n is not None else config.pop("n", None)
    if n is None:
        raise ValueError("component count n must come from --n or the config file")
    file_step = config.pop("step_size", None)
    step_size = args.step_size if args.step_size is not None else file_step
    params = theory.TheoryParams.from_json_dict(config)
    report = theory.budget_report(params, n=int(n), epsilon=args.epsilon, step_size=step_size)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_probe(args) -> int:
    if args.objective:
        obj = _load_objective(args.objective)
    else:
        obj = random_instance(args.family, args.n, args.dim, seed=args.seed)
    if args.point is not None:
        x = _parse_vector(args.point, obj.dim)
    else:
        rng = np.random.default_rng(args.seed)
        cert = obj.certificate
        radius = (cert.dissipativity_offset / cert.dissipativity_slope) ** 0.5 + 1.0
        x = radius * rng.standard_normal(obj.dim) / max(1.0, obj.dim**0.5)
    if args.kind == "minibatch":
        report = diag.minibatch_variance_probe(
            obj, x, args.batch, mode=args.mode, draws=args.draws, seed=args.seed
        )
    else:
        if args.snapshot is not None:
            snapshot = _parse_vector(args.snapshot, obj.dim)
        else:
            snapshot = np.zeros(obj.dim)
        report = diag.vr_variance_probe(
            obj, x, snapshot, args.batch, mode=args.mode, draws=args.draws, seed=args.seed
        )
    out = report.to_json_dict()
    out["point"] = x.tolist()
    print(json.dumps(out, indent=2))
    return 0


def _cmd_gibbs_check(args) -> int:
    obj = _load_objective(args.objective)
    table = diag.gibbs_quadrature(obj, args.beta, points_per_axis=args.points_per_axis)
    burn_in = round(args.steps * args.burn_in_fraction)
    samples = gld_samples(
        obj, args.eta, args.beta, args.steps, burn_in=burn_in, thin=args.thin, seed=args.seed
    )
    empirical = diag.empirical_density(samples, table, min_samples=1)
    tv = diag.gibbs_total_variation(table, empirical)
    gibbs_mean = diag.gibbs_expectation(table, table.f_values)
    empirical_mean = float(np.mean(obj.value_many(samples)))
    report = {
        "beta": args.beta,
        "step_size": args.eta,
        "steps": args.steps,
        "burn_in": burn_in,
        "thin": args.thin,
        "kept_samples": int(samples.shape[0]),
        "tv_distance": tv,
        "outside_fraction": empirical.outside_fraction,
        "partition_value": table.partition_value,
        "gibbs_mean_value": gibbs_mean,
        "empirical_mean_value": empirical_mean,
        "implied_discretization_constant": abs(empirical_mean - gibbs_mean)
        * args.beta
        / args.eta,
    }
    if args.out:
        out_path = Path(args.out)
        out_path.mkdir(parents=True, exist_ok=True)
        table.write_csv(out_path / "gibbs_density.csv")
        if not args.no_figures:
            from . import report as report_mod

            report_mod.render_density_figure(table, empirical, out_path / "gibbs-density.png")
    print(json.dumps(report, indent=2))
    return 0


def _cmd_certify(args) -> int:
    obj = _load_objective(args.objective)
    report = certify(obj, radius=args.radius, samples=args.samples, rng=args.seed)
    print(json.dumps(report.to_json_dict(), indent=2))
    if args.strict and not report.ok:
        return 2
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "budget": _cmd_budget,
    "probe": _cmd_probe,
    "gibbs-check": _cmd_gibbs_check,
    "certify": _cmd_certify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PlanValidationError as exc:
        json.dump({"error": {"type": "plan_validation", "messages": exc.errors}}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        json.dump(
            {"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr
        )
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
