import json

import numpy as np
import pytest

import langevinlab.harness as harness
from langevinlab.harness import (
    PlanValidationError,
    compare_algorithms,
    parse_plan,
    plan_fingerprint,
    render_comparison_table,
    run_plan,
)
from langevinlab.objectives import objective_to_json_dict
from langevinlab.theory import gradient_complexity


def minimal_plan(**overrides):
    plan = {
        "schema_version": 1,
        "objective": {
            "family": "quadratic",
            "parameters": {"anchors": [[-2.0], [-1.0], [1.0], [2.0]]},
        },
        "samplers": [
            {"name": "gld", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 200}
        ],
        "replications": {"count": 1, "base_seed": 7},
        "trackers": {"moments": False, "trace_stride": 0},
        "diagnostics": {},
    }
    plan.update(overrides)
    return plan


class TestParsePlan:
    def test_minimal_plan_parses(self):
        plan = parse_plan(json.dumps(minimal_plan()))
        assert plan.objective.n == 4
        assert plan.samplers[0][0] == "gld"

    def test_fingerprint_stable_under_key_reordering(self):
        data = minimal_plan()
        a = parse_plan(json.dumps(data))
        reordered = json.dumps(data, sort_keys=True)
        b = parse_plan(reordered)
        assert plan_fingerprint(a) == plan_fingerprint(b)

    def test_fingerprint_tracks_content(self):
        a = parse_plan(json.dumps(minimal_plan()))
        changed = minimal_plan()
        changed["samplers"][0]["steps"] = 201
        b = parse_plan(json.dumps(changed))
        assert plan_fingerprint(a) != plan_fingerprint(b)

    def test_output_directory_not_in_fingerprint(self):
        a = parse_plan(json.dumps(minimal_plan()))
        b = parse_plan(json.dumps(minimal_plan(output={"directory": "/tmp/x"})))
        assert plan_fingerprint(a) == plan_fingerprint(b)

    def test_batch_size_error_names_field_and_values(self):
        bad = minimal_plan(
            samplers=[
                {
                    "name": "s",
                    "algorithm": "sgld",
                    "step_size": 0.05,
                    "beta": 1.0,
                    "steps": 10,
                    "batch_size": 5,
                }
            ]
        )
        with pytest.raises(PlanValidationError) as err:
            parse_plan(json.dumps(bad))
        (message,) = err.value.errors
        assert "batch_size" in message and "5" in message and "4" in message

    def test_epoch_divisibility_error(self):
        bad = minimal_plan(
            samplers=[
                {
                    "algorithm": "vr-sgld",
                    "step_size": 0.05,
                    "beta": 1.0,
                    "steps": 10,
                    "batch_size": 2,
                    "epoch_length": 3,
                }
            ]
        )
        with pytest.raises(PlanValidationError, match="not divisible"):
            parse_plan(json.dumps(bad))

    def test_all_errors_collected(self):
        bad = minimal_plan(
            schema_version=2,
            samplers=[
                {
                    "algorithm": "sgld",
                    "step_size": -1.0,
                    "beta": 1.0,
                    "steps": 10,
                    "batch_size": 9,
                },
                {"algorithm": "gld", "step_size": 0.1, "beta": 0.0, "steps": 10},
            ],
        )
        with pytest.raises(PlanValidationError) as err:
            parse_plan(json.dumps(bad))
        assert len(err.value.errors) >= 4

    def test_per_sampler_seed_rejected(self):
        bad = minimal_plan()
        bad["samplers"][0]["seed"] = 3
        with pytest.raises(PlanValidationError, match="base_seed"):
            parse_plan(json.dumps(bad))

    def test_invalid_json(self):
        with pytest.raises(PlanValidationError, match="not valid JSON"):
            parse_plan("{nope")


class TestRunPlan:
    def test_records_are_byte_identical(self, tmp_path):
        text = json.dumps(minimal_plan())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_plan(parse_plan(text), out_dir=out_a, figures=False)
        run_plan(parse_plan(text), out_dir=out_b, figures=False)
        assert (out_a / "record.json").read_bytes() == (out_b / "record.json").read_bytes()

    def test_degeneracy_end_to_end(self):
        plan = minimal_plan(
            samplers=[
                {"name": "gld", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 300},
                {
                    "name": "sgld-full",
                    "algorithm": "sgld",
                    "step_size": 0.05,
                    "beta": 1.0,
                    "steps": 300,
                    "batch_size": 4,
                },
            ],
            replications={"count": 2, "base_seed": 42},
        )
        record = run_plan(parse_plan(json.dumps(plan))).record
        gld, sgld = record["configs"]
        for rep_a, rep_b in zip(gld["replicas"], sgld["replicas"]):
            assert rep_a["final_gap"] == rep_b["final_gap"]
            assert rep_a["seed"] == rep_b["seed"]

    def test_aggregate_is_replica_mean(self):
        plan = minimal_plan(replications={"count": 3, "base_seed": 0})
        record = run_plan(parse_plan(json.dumps(plan))).record
        entry = record["configs"][0]
        gaps = [rep["final_gap"] for rep in entry["replicas"]]
        assert entry["aggregate"]["mean_gap"] == pytest.approx(float(np.mean(gaps)))
        assert entry["aggregate"]["std_gap"] == pytest.approx(float(np.std(gaps, ddof=1)))

    def test_failing_diagnostic_is_isolated(self, tmp_path):
        plan = minimal_plan(
            trackers={"moments": False, "trace_stride": 10},
            diagnostics={"minibatch_probe": {"batch_size": 9}},
        )
        record = run_plan(parse_plan(json.dumps(plan)), out_dir=tmp_path, figures=False)
        assert "error" in record.record["diagnostics"]["minibatch_probe"]
        assert record.record["configs"][0]["replicas"][0]["final_gap"] is not None
        assert (tmp_path / "runs" / "gld" / "replica-0.csv").exists()

    def test_failing_replica_is_isolated(self, monkeypatch):
        calls = {"n": 0}
        original = harness.run

        def flaky(config, obj, trackers=()):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("injected failure")
            return original(config, obj, trackers=trackers)

        monkeypatch.setattr(harness, "run", flaky)
        plan = minimal_plan(replications={"count": 2, "base_seed": 5})
        record = run_plan(parse_plan(json.dumps(plan))).record
        replicas = record["configs"][0]["replicas"]
        assert "error" in replicas[0]
        assert "final_gap" in replicas[1]
        assert record["configs"][0]["aggregate"]["replicas_ok"] == 1

    def test_timings_live_outside_the_record(self, tmp_path):
        record = run_plan(parse_plan(json.dumps(minimal_plan())), out_dir=tmp_path, figures=False)
        assert "elapsed" not in json.dumps(record.record)
        timings = json.loads((tmp_path / "timings.json").read_text())
        assert timings["total_seconds"] > 0

    def test_moment_summary_carries_envelope(self):
        plan = minimal_plan(
            samplers=[
                {"name": "gld", "algorithm": "gld", "step_size": 0.05, "beta": 6.0, "steps": 200}
            ],
            trackers={"moments": True},
        )
        record = run_plan(parse_plan(json.dumps(plan))).record
        moments = record["configs"][0]["replicas"][0]["trackers"]["moments"]
        assert moments["exp_moment_envelope"] is not None
        assert moments["log_mean_exp_sq_norm"] <= moments["exp_moment_envelope"]

    def test_moment_envelope_none_outside_validity(self):
        # beta = 1 violates the envelope's temperature threshold
        plan = minimal_plan(trackers={"moments": True})
        record = run_plan(parse_plan(json.dumps(plan))).record
        moments = record["configs"][0]["replicas"][0]["trackers"]["moments"]
        assert moments["exp_moment_envelope"] is None

    def test_output_dir_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(tmp_path / "envout"))
        run_plan(parse_plan(json.dumps(minimal_plan())), figures=False)
        assert (tmp_path / "envout" / "record.json").exists()

    def test_gibbs_check_diagnostic(self, tmp_path):
        plan = minimal_plan(
            diagnostics={
                "gibbs_check": {
                    "beta": 1.0,
                    "step_size": 0.01,
                    "steps": 30_000,
                    "points_per_axis": 48,
                    "seed": 3,
                }
            }
        )
        record = run_plan(parse_plan(json.dumps(plan)), out_dir=tmp_path, figures=False)
        report = record.record["diagnostics"]["gibbs_check"]
        assert report["tv_distance"] < 0.2
        assert report["kept_samples"] == 27_000
        assert "implied_discretization_constant" in report
        assert (tmp_path / "tables" / "gibbs_density.csv").exists()

    def test_budget_and_certify_diagnostics(self):
        plan = minimal_plan(
            diagnostics={
                "certify": {"samples": 200},
                "budget": {"epsilon": 0.5, "beta": 1.0},
                "vr_probe": {"batch_size": 2, "point": [0.5], "snapshot": [0.0]},
            }
        )
        record = run_plan(parse_plan(json.dumps(plan))).record
        assert record["diagnostics"]["certify"]["ok"]
        assert record["diagnostics"]["budget"]["algorithms"]["gld"]["steps"] > 0
        assert record["diagnostics"]["vr_probe"]["unbiasedness_residual"] <= 1e-12

    def test_figures_written(self, tmp_path):
        plan = minimal_plan(
            samplers=[
                {"name": "a", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 100},
                {"name": "b", "algorithm": "gld", "step_size": 0.02, "beta": 1.0, "steps": 100},
            ],
            trackers={"moments": False, "trace_stride": 5},
        )
        run_plan(parse_plan(json.dumps(plan)), out_dir=tmp_path, figures=True)
        assert (tmp_path / "figures" / "trace-a.png").exists()
        assert (tmp_path / "figures" / "comparison.png").exists()


class TestCompare:
    def test_identical_configs_identical_rows(self):
        plan = minimal_plan(
            samplers=[
                {"name": "a", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 150},
                {"name": "b", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 150},
            ]
        )
        rows = run_plan(parse_plan(json.dumps(plan))).record["comparison"]
        a, b = rows
        for key in ("grad_evals", "mean_gap", "std_gap"):
            assert a[key] == b[key]

    def test_matched_gradient_budgets(self):
        plan = minimal_plan(
            samplers=[
                {"name": "gld", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 100},
                {
                    "name": "sgld-half",
                    "algorithm": "sgld",
                    "step_size": 0.05,
                    "beta": 1.0,
                    "steps": 200,
                    "batch_size": 2,
                },
            ]
        )
        rows = run_plan(parse_plan(json.dumps(plan))).record["comparison"]
        assert rows[0]["grad_evals"] == rows[1]["grad_evals"] == 400

    def test_vr_row_matches_theory_complexity(self):
        plan = minimal_plan(
            samplers=[
                {"name": "gld", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 100},
                {
                    "name": "vr",
                    "algorithm": "vr-sgld",
                    "step_size": 0.05,
                    "beta": 1.0,
                    "steps": 100,
                    "batch_size": 2,
                    "epoch_length": 10,
                },
            ]
        )
        rows = run_plan(parse_plan(json.dumps(plan))).record["comparison"]
        vr = rows[1]
        assert vr["grad_evals"] == gradient_complexity("vr-sgld", 4, 100, 2, 10)
        assert vr["grad_evals"] == vr["predicted_grad_evals"]

    def test_single_config_rejected(self):
        record = run_plan(parse_plan(json.dumps(minimal_plan()))).record
        with pytest.raises(ValueError, match="at least two"):
            compare_algorithms(record)

    def test_table_renders(self):
        plan = minimal_plan(
            samplers=[
                {"name": "a", "algorithm": "gld", "step_size": 0.05, "beta": 1.0, "steps": 50},
                {"name": "b", "algorithm": "gld", "step_size": 0.01, "beta": 1.0, "steps": 50},
            ]
        )
        rows = run_plan(parse_plan(json.dumps(plan))).record["comparison"]
        text = render_comparison_table(rows)
        assert "grad_evals" in text.splitlines()[0]
        assert len(text.splitlines()) == 4
