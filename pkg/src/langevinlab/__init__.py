"""Langevin dynamics samplers (full-gradient, minibatch, variance-reduced)
over certified finite-sum benchmark objectives, with closed-form bound
evaluators, brute-force diagnostics, and a deterministic experiment
harness."""

from .benchmarks import cos1d, cos2d, quad1d, quad2d, random_instance
from .diagnostics import (
    GibbsTable,
    MomentTracker,
    ar1_stationary_variance,
    empirical_density,
    find_global_min,
    gibbs_expectation,
    gibbs_quadrature,
    gibbs_total_variation,
    minibatch_variance_probe,
    sample_from_table,
    total_variation,
    vr_variance_probe,
)
from .dynamics import (
    Algorithm,
    ChainState,
    NoiseSource,
    RunResult,
    SampleRecorder,
    SamplerConfig,
    TraceRecorder,
    gld_samples,
    gld_step,
    initial_state,
    run,
    sample_index_subset,
    semi_stochastic_gradient,
    sgld_step,
    take_snapshot,
    vr_sgld_step,
)
from .harness import (
    ExperimentPlan,
    PlanValidationError,
    RunRecord,
    compare_algorithms,
    parse_plan,
    plan_fingerprint,
    render_comparison_table,
    run_plan,
)
from .objectives import (
    Certificate,
    CertificateReport,
    CosineObjective,
    FiniteSumObjective,
    QuadraticObjective,
    certify,
    make_cosine,
    make_quadratic,
    objective_from_json,
    objective_from_json_dict,
    objective_to_json,
    objective_to_json_dict,
    with_gradient_bound,
)
from .theory import (
    BatchFloor,
    ErrorBound,
    TheoryParams,
    VrSchedule,
    budget_report,
    exp_moment_envelope,
    geometric_step_budget,
    gibbs_suboptimality_bound,
    gibbs_suboptimality_bound_slope,
    gld_step_budget,
    gld_value_gap_bound,
    gradient_bound_constant,
    gradient_complexity,
    mixing_prefactor,
    safe_step_size,
    second_moment_bound,
    sgld_batch_floor,
    sgld_value_gap_bound,
    spectral_gap,
    vr_sgld_schedule,
    vr_sgld_value_gap_bound,
)

__version__ = "0.1.0"
