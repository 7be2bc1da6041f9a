"""Configuration-driven experiment runner.

A plan is a JSON document naming one objective, one or more sampler
configurations, a replication spec, and optional diagnostics.  Replica
seeds are derived as ``base_seed + replica_index`` and shared across
configurations, so two configurations in one plan can be compared under
common noise.  Everything a run produces is reproducible from the plan
alone; wall-clock timings are kept out of the persisted record (they go
to a sibling ``timings.json``) so identical plans yield byte-identical
records.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as diag
from . import theory
from .dynamics import (
    Algorithm,
    SamplerConfig,
    TraceRecorder,
    gld_samples,
    run,
)
from .objectives import (
    FiniteSumObjective,
    certify,
    objective_from_json_dict,
    objective_to_json_dict,
)

__all__ = [
    "SCHEMA_VERSION",
    "PlanValidationError",
    "ExperimentPlan",
    "parse_plan",
    "plan_fingerprint",
    "RunRecord",
    "run_plan",
    "compare_algorithms",
    "render_comparison_table",
]

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "LANGEVINLAB_OUT"


class PlanValidationError(ValueError):
    """Carries every validation problem found in a plan, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid plan: " + "; ".join(self.errors))


@dataclass
class ExperimentPlan:
    objective: FiniteSumObjective
    samplers: list  # [(name, SamplerConfig), ...]
    replications: int
    base_seed: int
    trackers: dict
    diagnostics: dict
    output_directory: Optional[str]
    raw: dict


_KNOWN_DIAGNOSTICS = {"certify", "gibbs_check", "minibatch_probe", "vr_probe", "budget"}


def parse_plan(source) -> ExperimentPlan:
    """Parse and validate a plan from JSON text or an already-loaded dict.

    Collects every validation error before raising so a bad plan can be
    fixed in one pass.
    """
    if isinstance(source, (str, bytes)):
        try:
            data = json.loads(source)
        except json.JSONDecodeError as exc:
            raise PlanValidationError([f"not valid JSON: {exc}"]) from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise PlanValidationError(["plan must be a JSON object"])

    errors = []
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")

    objective = None
    if "objective" not in data:
        errors.append("missing objective")
    else:
        try:
            objective = objective_from_json_dict(data["objective"])
        except Exception as exc:
            errors.append(f"objective: {exc}")

    samplers = []
    entries = data.get("samplers")
    if not isinstance(entries, list) or not entries:
        errors.append("samplers must be a nonempty list")
        entries = []
    names = set()
    for i, entry in enumerate(entries):
        label = f"samplers[{i}]"
        if not isinstance(entry, dict):
            errors.append(f"{label}: must be an object")
            continue
        if "seed" in entry:
            errors.append(
                f"{label}: per-sampler seeds are not allowed; seeds derive from "
                f"replications.base_seed + replica index"
            )
            continue
        name = entry.get("name") or f"{entry.get('algorithm', 'sampler')}-{i}"
        if name in names:
            errors.append(f"{label}: duplicate name {name!r}")
        names.add(name)
        try:
            config = SamplerConfig.from_json_dict(entry)
        except Exception as exc:
            errors.append(f"{label}: {exc}")
            continue
        if objective is not None:
            for problem in config.validation_errors(objective.n):
                errors.append(f"{label} ({name}): {problem}")
        samplers.append((name, config))

    reps = data.get("replications", {})
    count = reps.get("count", 1)
    base_seed = reps.get("base_seed", 0)
    if not (isinstance(count, int) and count >= 1):
        errors.append(f"replications.count must be a positive integer, got {count!r}")
    if not isinstance(base_seed, int):
        errors.append(f"replications.base_seed must be an integer, got {base_seed!r}")

    trackers = data.get("trackers", {})
    if not isinstance(trackers, dict):
        errors.append("trackers must be an object")
        trackers = {}
    stride = trackers.get("trace_stride", 0)
    if not (isinstance(stride, int) and stride >= 0):
        errors.append(f"trackers.trace_stride must be a nonnegative integer, got {stride!r}")

    diagnostics = data.get("diagnostics", {})
    if not isinstance(diagnostics, dict):
        errors.append("diagnostics must be an object")
        diagnostics = {}
    for key in diagnostics:
        if key not in _KNOWN_DIAGNOSTICS:
            errors.append(
                f"diagnostics.{key}: unknown diagnostic (known: {sorted(_KNOWN_DIAGNOSTICS)})"
            )

    output_directory = (data.get("output") or {}).get("directory")

    if errors:
        raise PlanValidationError(errors)
    return ExperimentPlan(
        objective=objective,
        samplers=samplers,
        replications=count,
        base_seed=base_seed,
        trackers=trackers,
        diagnostics=diagnostics,
        output_directory=output_directory,
        raw=data,
    )


def _canonical_content(raw: dict) -> dict:
    content = {k: v for k, v in raw.items() if k != "output"}
    return content


def plan_fingerprint(plan: ExperimentPlan) -> str:
    """SHA-256 over the plan's canonical JSON.

    The output directory is excluded: it relocates artifacts without
    changing any produced number.
    """
    blob = json.dumps(_canonical_content(plan.raw), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class RunRecord:
    """In-memory result of a plan: the persisted record plus timings."""

    record: dict
    timings: dict

    @property
    def fingerprint(self) -> str:
        return self.record["fingerprint"]

    def to_json(self) -> str:
        return json.dumps(self.record, indent=2, sort_keys=True)


def _aggregate(gaps):
    clean = [g for g in gaps if g is not None]
    if not clean:
        return {"mean_gap": None, "std_gap": None, "replicas_ok": 0}
    mean = float(np.mean(clean))
    std = float(np.std(clean, ddof=1)) if len(clean) > 1 else 0.0
    return {"mean_gap": mean, "std_gap": std, "replicas_ok": len(clean)}


def _locate_minimum(obj: FiniteSumObjective):
    known = obj.known_minimizer()
    if known is not None:
        return known, obj.value(known)
    result = diag.find_global_min(obj)
    return result.x, result.value


def _moment_envelope(obj: FiniteSumObjective, config: SamplerConfig):
    """Linear reference line for the tracked log-mean-exp of ||x_k||^2;
    None when the envelope's preconditions fail for this run."""
    try:
        params = theory.TheoryParams.from_certificate(
            obj.certificate, beta=config.beta, dim=obj.dim
        )
        return theory.exp_moment_envelope(params, config.step_size, config.steps)
    except ValueError:
        return None


def run_plan(plan: ExperimentPlan, out_dir=None, figures: bool = True) -> RunRecord:
    """Execute every replica of every sampler config, then diagnostics.

    Failures are isolated per run and per diagnostic: a crashing replica
    or probe is recorded as an error entry and the remaining work
    proceeds.  When an output directory is given (argument, plan, or the
    LANGEVINLAB_OUT environment variable) the record, per-run trace CSVs,
    and report figures are written there.
    """
    started = time.perf_counter()
    obj = plan.objective
    out = out_dir or plan.output_directory or os.environ.get(OUTPUT_DIR_ENV)
    out_path = Path(out) if out else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "runs").mkdir(exist_ok=True)

    x_star, f_star = _locate_minimum(obj)
    stride = plan.trackers.get("trace_stride", 0)
    want_moments = bool(plan.trackers.get("moments", True))

    config_entries = []
    config_timings = []
    for name, config in plan.samplers:
        replicas = []
        replica_seconds = []
        trace_paths = []
        for r in range(plan.replications):
            seed = plan.base_seed + r
            seeded = SamplerConfig(
                algorithm=config.algorithm,
                step_size=config.step_size,
                beta=config.beta,
                steps=config.steps,
                batch_size=config.batch_size,
                epoch_length=config.epoch_length,
                seed=seed,
            )
            trackers = []
            if want_moments:
                trackers.append(diag.MomentTracker())
            trace = TraceRecorder(stride) if stride else None
            if trace is not None:
                trackers.append(trace)
            try:
                result = run(seeded, obj, trackers=trackers)
                final_value = obj.value(result.final_x)
                entry = {
                    "seed": seed,
                    "final_x": result.final_x.tolist(),
                    "final_value": final_value,
                    "final_gap": final_value - f_star,
                    "grad_evals": result.grad_evals,
                    "trackers": result.tracker_summaries,
                }
                if "moments" in entry["trackers"]:
                    entry["trackers"]["moments"]["exp_moment_envelope"] = _moment_envelope(
                        obj, config
                    )
                replica_seconds.append(result.elapsed_seconds)
                if trace is not None and out_path is not None:
                    run_dir = out_path / "runs" / name
                    run_dir.mkdir(parents=True, exist_ok=True)
                    csv_path = run_dir / f"replica-{r}.csv"
                    trace.write_csv(csv_path)
                    trace_paths.append((r, csv_path, trace))
            except Exception as exc:  # crash isolation: record and move on
                entry = {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}
                replica_seconds.append(None)
            replicas.append(entry)
        gaps = [rep.get("final_gap") for rep in replicas]
        config_entries.append(
            {
                "name": name,
                "config": config.to_json_dict(),
                "replicas": replicas,
                "aggregate": _aggregate(gaps),
            }
        )
        config_timings.append({"name": name, "replica_seconds": replica_seconds})
        if figures and out_path is not None and trace_paths:
            _render_trace(out_path, name, trace_paths[0][2], f_star)

    diagnostics_report = {}
    diagnostics_started = time.perf_counter()
    for key, spec in plan.diagnostics.items():
        if spec is None:
            continue
        try:
            diagnostics_report[key] = _run_diagnostic(
                key, spec, plan, obj, x_star, f_star, out_path, figures
            )
        except Exception as exc:
            diagnostics_report[key] = {"error": f"{type(exc).__name__}: {exc}"}
    diagnostics_seconds = time.perf_counter() - diagnostics_started

    record = {
        "schema_version": SCHEMA_VERSION,
        "fingerprint": plan_fingerprint(plan),
        "objective": objective_to_json_dict(obj),
        "minimizer": {"x": np.asarray(x_star).tolist(), "value": f_star},
        "configs": config_entries,
        "diagnostics": diagnostics_report,
    }
    if len(config_entries) >= 2:
        record["comparison"] = compare_algorithms(record)

    timings = {
        "total_seconds": time.perf_counter() - started,
        "configs": config_timings,
        "diagnostics_seconds": diagnostics_seconds,
    }
    result = RunRecord(record=record, timings=timings)

    if out_path is not None:
        (out_path / "record.json").write_text(result.to_json() + "\n", encoding="utf-8")
        (out_path / "timings.json").write_text(
            json.dumps(timings, indent=2) + "\n", encoding="utf-8"
        )
        if figures and len(config_entries) >= 2:
            _render_comparison(out_path, record["comparison"])
    return result


def _run_diagnostic(key, spec, plan, obj, x_star, f_star, out_path, figures):
    spec = dict(spec or {})
    if key == "certify":
        report = certify(
            obj,
            radius=spec.get("radius"),
            samples=int(spec.get("samples", 2000)),
            rng=int(spec.get("seed", 0)),
        )
        return report.to_json_dict()

    if key == "minibatch_probe":
        point = spec.get("point")
        x = np.asarray(point, dtype=float) if point is not None else np.asarray(x_star)
        report = diag.minibatch_variance_probe(
            obj,
            x,
            batch_size=int(spec["batch_size"]),
            mode=spec.get("mode", "exhaustive"),
            draws=int(spec.get("draws", 10_000)),
            seed=int(spec.get("seed", 0)),
        )
        return report.to_json_dict()

    if key == "vr_probe":
        point = spec.get("point")
        snap = spec.get("snapshot")
        x = np.asarray(point, dtype=float) if point is not None else np.asarray(x_star)
        snapshot = np.asarray(snap, dtype=float) if snap is not None else np.zeros(obj.dim)
        report = diag.vr_variance_probe(
            obj,
            x,
            snapshot,
            batch_size=int(spec["batch_size"]),
            mode=spec.get("mode", "exhaustive"),
            draws=int(spec.get("draws", 10_000)),
            seed=int(spec.get("seed", 0)),
        )
        return report.to_json_dict()

    if key == "budget":
        beta = float(spec.get("beta", plan.samplers[0][1].beta))
        params = theory.TheoryParams.from_certificate(
            obj.certificate,
            beta=beta,
            dim=obj.dim,
            rho=float(spec.get("rho", 0.5)),
            c0=float(spec.get("c0", 1.0)),
            c1=float(spec.get("c1", 1.0)),
            c2=float(spec.get("c2", 1.0)),
        )
        return theory.budget_report(
            params,
            n=obj.n,
            epsilon=float(spec["epsilon"]),
            step_size=spec.get("step_size"),
        )

    if key == "gibbs_check":
        return _gibbs_check(spec, obj, f_star, out_path, figures)

    raise ValueError(f"unknown diagnostic {key!r}")


def _gibbs_check(spec, obj, f_star, out_path, figures):
    """Compare the chain's empirical law against the quadrature table.

    Also reports the implied discretization constant
    |E_emp[F] - E_pi[F]| * beta / eta, since the measure-gap bound leaves
    its constant unspecified.
    """
    beta = float(spec["beta"])
    step_size = float(spec.get("step_size", 1e-3))
    steps = int(spec.get("steps", 1_000_000))
    burn_in = int(spec.get("burn_in", round(steps * float(spec.get("burn_in_fraction", 0.1)))))
    thin = int(spec.get("thin", 1))
    seed = int(spec.get("seed", 0))
    points_per_axis = int(spec.get("points_per_axis", 128))
    half_width = spec.get("box_half_width")
    box = [(-float(half_width), float(half_width))] * obj.dim if half_width else None

    table = diag.gibbs_quadrature(obj, beta, box=box, points_per_axis=points_per_axis)
    samples = gld_samples(
        obj, step_size, beta, steps, burn_in=burn_in, thin=thin, seed=seed
    )
    empirical = diag.empirical_density(samples, table, min_samples=1)
    tv = diag.gibbs_total_variation(table, empirical)
    gibbs_mean_f = diag.gibbs_expectation(table, table.f_values)
    empirical_mean_f = float(np.mean(obj.value_many(samples)))
    implied_c = abs(empirical_mean_f - gibbs_mean_f) * beta / step_size

    if out_path is not None:
        tables_dir = out_path / "tables"
        tables_dir.mkdir(exist_ok=True)
        table.write_csv(tables_dir / "gibbs_density.csv")
        if figures:
            _render_density(out_path, table, empirical)
    return {
        "beta": beta,
        "step_size": step_size,
        "steps": steps,
        "burn_in": burn_in,
        "thin": thin,
        "kept_samples": int(samples.shape[0]),
        "points_per_axis": points_per_axis,
        "tv_distance": tv,
        "outside_fraction": empirical.outside_fraction,
        "outside_warning": empirical.outside_warning,
        "partition_value": table.partition_value,
        "gibbs_mean_value": gibbs_mean_f,
        "empirical_mean_value": empirical_mean_f,
        "gibbs_value_gap": gibbs_mean_f - f_star,
        "implied_discretization_constant": implied_c,
    }


def compare_algorithms(record: dict) -> list:
    """Per-config comparison rows: gradient work spent vs gap achieved.

    Requires at least two configs over the shared objective; reports
    measurements only, no ranking.
    """
    configs = record["configs"]
    if len(configs) < 2:
        raise ValueError("comparison needs at least two sampler configs")
    rows = []
    for entry in configs:
        cfg = entry["config"]
        grad_evals = sorted(
            {rep["grad_evals"] for rep in entry["replicas"] if "grad_evals" in rep}
        )
        predicted = theory.gradient_complexity(
            cfg["algorithm"],
            record["objective"]["n"],
            cfg["steps"],
            cfg.get("batch_size"),
            cfg.get("epoch_length"),
        )
        rows.append(
            {
                "name": entry["name"],
                "algorithm": cfg["algorithm"],
                "steps": cfg["steps"],
                "batch_size": cfg.get("batch_size"),
                "epoch_length": cfg.get("epoch_length"),
                "grad_evals": grad_evals[0] if len(grad_evals) == 1 else grad_evals,
                "predicted_grad_evals": predicted,
                "mean_gap": entry["aggregate"]["mean_gap"],
                "std_gap": entry["aggregate"]["std_gap"],
            }
        )
    return rows


def render_comparison_table(rows) -> str:
    """Plain-text table of the comparison rows."""
    headers = ["name", "algorithm", "steps", "batch", "epoch", "grad_evals", "mean_gap", "std_gap"]
    lines = [" | ".join(headers)]
    lines.append("-+-".join("-" * len(h) for h in headers))
    for row in rows:
        mean = row["mean_gap"]
        std = row["std_gap"]
        lines.append(
            " | ".join(
                str(v)
                for v in [
                    row["name"],
                    row["algorithm"],
                    row["steps"],
                    row["batch_size"] if row["batch_size"] is not None else "-",
                    row["epoch_length"] if row["epoch_length"] is not None else "-",
                    row["grad_evals"],
                    "-" if mean is None else f"{mean:.6g}",
                    "-" if std is None else f"{std:.3g}",
                ]
            )
        )
    return "\n".join(lines)


def _render_trace(out_path: Path, name: str, trace: TraceRecorder, f_star: float) -> None:
    from . import report

    fig_dir = out_path / "figures"
    fig_dir.mkdir(exist_ok=True)
    report.render_trace_figure(trace.rows, f_star, fig_dir / f"trace-{name}.png", title=name)


def _render_density(out_path: Path, table, empirical) -> None:
    from . import report

    fig_dir = out_path / "figures"
    fig_dir.mkdir(exist_ok=True)
    report.render_density_figure(table, empirical, fig_dir / "gibbs-density.png")


def _render_comparison(out_path: Path, rows) -> None:
    from . import report

    fig_dir = out_path / "figures"
    fig_dir.mkdir(exist_ok=True)
    report.render_comparison_figure(rows, fig_dir / "comparison.png")
