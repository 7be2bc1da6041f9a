"""Closed-form evaluators for the convergence constants, error bounds, and
budget formulas of the discretized Langevin samplers.

Every function here is pure arithmetic on :class:`TheoryParams`.  The
underlying bounds involve absolute constants that are not pinned down
anywhere (a geometric per-dimension factor ``rho`` and three
multiplicative constants c0, c1, c2); they are explicit inputs with
default 1.0 (``rho`` defaults to 0.5) and are echoed in every report
rather than silently baked in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .objectives import Certificate, FiniteSumObjective

__all__ = [
    "TheoryParams",
    "ErrorBound",
    "spectral_gap",
    "mixing_prefactor",
    "second_moment_bound",
    "gradient_bound_constant",
    "gibbs_suboptimality_bound",
    "gibbs_suboptimality_bound_slope",
    "gld_value_gap_bound",
    "sgld_value_gap_bound",
    "vr_sgld_value_gap_bound",
    "geometric_step_budget",
    "gld_step_budget",
    "sgld_batch_floor",
    "BatchFloor",
    "vr_sgld_schedule",
    "VrSchedule",
    "gradient_complexity",
    "safe_step_size",
    "exp_moment_envelope",
    "budget_report",
]


@dataclass(frozen=True)
class TheoryParams:
    """Inputs to the bound evaluators.

    The first four fields come from an objective's certificate; ``beta``
    and ``dim`` from the run being analyzed.  ``rho`` in (0, 1] is the
    per-dimension geometric factor of the spectral gap (1 is a degenerate
    value admitted for testing); c0..c2 are the otherwise-unspecified
    absolute constants of the bounds.
    """

    smoothness: float
    dissipativity_slope: float
    dissipativity_offset: float
    beta: float
    dim: int
    gradient_bound: float = 0.0
    rho: float = 0.5
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not self.smoothness > 0:
            raise ValueError("smoothness must be positive")
        if not self.dissipativity_slope > 0:
            raise ValueError("dissipativity_slope must be positive")
        if not self.dissipativity_offset > 0:
            raise ValueError("dissipativity_offset must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not (isinstance(self.dim, int) and self.dim >= 1):
            raise ValueError("dim must be a positive integer")
        if self.gradient_bound < 0:
            raise ValueError("gradient_bound must be nonnegative")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        for name in ("c0", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_certificate(
        cls,
        certificate: Certificate,
        beta: float,
        dim: int,
        rho: float = 0.5,
        c0: float = 1.0,
        c1: float = 1.0,
        c2: float = 1.0,
    ) -> "TheoryParams":
        return cls(
            smoothness=certificate.smoothness,
            dissipativity_slope=certificate.dissipativity_slope,
            dissipativity_offset=certificate.dissipativity_offset,
            beta=beta,
            dim=dim,
            gradient_bound=certificate.gradient_bound,
            rho=rho,
            c0=c0,
            c1=c1,
            c2=c2,
        )

    @property
    def mixing_condition(self) -> float:
        """2M(b*beta + m*beta + d)/m, the argument of the gap's logarithm."""
        m = self.dissipativity_slope
        return (
            2.0
            * self.smoothness
            * (self.dissipativity_offset * self.beta + m * self.beta + self.dim)
            / m
        )

    def to_json_dict(self) -> dict:
        return {
            "smoothness": self.smoothness,
            "dissipativity_slope": self.dissipativity_slope,
            "dissipativity_offset": self.dissipativity_offset,
            "beta": self.beta,
            "dim": self.dim,
            "gradient_bound": self.gradient_bound,
            "rho": self.rho,
            "c0": self.c0,
            "c1": self.c1,
            "c2": self.c2,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TheoryParams":
        kwargs = dict(data)
        kwargs["dim"] = int(kwargs["dim"])
        return cls(**kwargs)


def spectral_gap(p: TheoryParams) -> float:
    """Exponential ergodicity rate: 2 m rho^d / log(mixing condition)."""
    kappa = p.mixing_condition
    if kappa <= 1.0:
        raise ValueError(f"mixing condition {kappa} <= 1 makes the gap undefined")
    return 2.0 * p.dissipativity_slope * p.rho**p.dim / math.log(kappa)


def mixing_prefactor(p: TheoryParams, step_size: float) -> float:
    """Constant in front of the geometric mixing term.

    c0 * M * S * (m + e^{m eta} * M * S) / (m^2 rho^{d/2}) with
    S = b*beta + m*beta + d.
    """
    if step_size < 0:
        raise ValueError("step_size must be nonnegative")
    m = p.dissipativity_slope
    s = p.dissipativity_offset * p.beta + m * p.beta + p.dim
    return (
        p.c0
        * p.smoothness
        * s
        * (m + math.exp(m * step_size) * p.smoothness * s)
        / (m**2 * p.rho ** (p.dim / 2.0))
    )


def second_moment_bound(p: TheoryParams) -> float:
    """Uniform bound on E||x_k||^2 along any of the three chains:
    2 (1 + 1/m) (b + 2 G^2 + d/beta)."""
    m = p.dissipativity_slope
    return 2.0 * (1.0 + 1.0 / m) * (
        p.dissipativity_offset + 2.0 * p.gradient_bound**2 + p.dim / p.beta
    )


def gradient_bound_constant(obj: FiniteSumObjective, x_star) -> float:
    """Affine gradient-bound intercept from the located global minimizer:
    max_i ||grad f_i(x*)|| + b M / m."""
    import numpy as np

    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (obj.dim,):
        raise ValueError(f"x_star must have shape ({obj.dim},), got {x_star.shape}")
    grads = obj.component_gradients(np.arange(obj.n), x_star)
    cert = obj.certificate
    return float(np.max(np.linalg.norm(grads, axis=1))) + (
        cert.dissipativity_offset * cert.smoothness / cert.dissipativity_slope
    )


def gibbs_suboptimality_bound(p: TheoryParams) -> float:
    """Bound on E_pi[F] - min F using the dissipativity offset:
    (d / 2 beta) log(e M (b beta / d + 1) / m)."""
    return (p.dim / (2.0 * p.beta)) * math.log(
        math.e
        * p.smoothness
        * (p.dissipativity_offset * p.beta / p.dim + 1.0)
        / p.dissipativity_slope
    )


def gibbs_suboptimality_bound_slope(p: TheoryParams) -> float:
    """Variant of :func:`gibbs_suboptimality_bound` with the dissipativity
    slope instead of the offset inside the logarithm.

    Both forms circulate for this bound and they disagree whenever
    b != m; the offset form is the one composed into the value-gap
    bounds, this one is exposed separately for comparison.
    """
    return (p.dim / (2.0 * p.beta)) * math.log(
        math.e
        * p.smoothness
        * (p.dissipativity_slope * p.beta / p.dim + 1.0)
        / p.dissipativity_slope
    )


@dataclass(frozen=True)
class ErrorBound:
    """Value-gap bound split into its additive pieces."""

    variance_term: float
    mixing_term: float
    discretization_term: float
    suboptimality_term: float

    @property
    def total(self) -> float:
        return (
            self.variance_term
            + self.mixing_term
            + self.discretization_term
            + self.suboptimality_term
        )

    def to_json_dict(self) -> dict:
        return {
            "variance_term": self.variance_term,
            "mixing_term": self.mixing_term,
            "discretization_term": self.discretization_term,
            "suboptimality_term": self.suboptimality_term,
            "total": self.total,
        }


def gld_value_gap_bound(p: TheoryParams, step_size: float, steps: int) -> ErrorBound:
    """Bound on E[F(x_K)] - min F for the full-gradient chain:
    Theta e^{-lambda K eta} + c1 eta / beta + suboptimality."""
    if not step_size > 0:
        raise ValueError("step_size must be positive")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    theta = mixing_prefactor(p, step_size)
    gap = spectral_gap(p)
    return ErrorBound(
        variance_term=0.0,
        mixing_term=theta * math.exp(-gap * steps * step_size),
        discretization_term=p.c1 * step_size / p.beta,
        suboptimality_term=gibbs_suboptimality_bound(p),
    )


def _check_batch(n: int, batch_size: int) -> None:
    if n < 2:
        raise ValueError("minibatch bounds need n >= 2 (the variance factor divides by n-1)")
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={n}]")


def sgld_value_gap_bound(
    p: TheoryParams, step_size: float, steps: int, n: int, batch_size: int
) -> ErrorBound:
    """Minibatch analogue of :func:`gld_value_gap_bound` plus the
    minibatch-variance term
    c1 Gamma K eta [beta (n-B)(M sqrt(Gamma) + G)^2 / (B(n-1))]^{1/2};
    exactly zero at full batch."""
    _check_batch(n, batch_size)
    base = gld_value_gap_bound(p, step_size, steps)
    if batch_size == n:
        variance = 0.0
    else:
        gamma = second_moment_bound(p)
        factor = (
            p.beta
            * (n - batch_size)
            * (p.smoothness * math.sqrt(gamma) + p.gradient_bound) ** 2
            / (batch_size * (n - 1))
        )
        variance = p.c1 * gamma * steps * step_size * math.sqrt(factor)
    return ErrorBound(
        variance_term=variance,
        mixing_term=base.mixing_term,
        discretization_term=p.c2 * step_size / p.beta,
        suboptimality_term=base.suboptimality_term,
    )


def vr_sgld_value_gap_bound(
    p: TheoryParams,
    step_size: float,
    steps: int,
    n: int,
    batch_size: int,
    epoch_length: int,
) -> ErrorBound:
    """Variance-reduced analogue with the epoch-coupled variance term
    c1 Gamma K^{3/4} eta [L beta M^2 (n-B) / (B(n-1)) *
    (9 eta L (M^2 Gamma + G^2) + d/beta)]^{1/4};
    exactly zero at full batch."""
    _check_batch(n, batch_size)
    if epoch_length < 1:
        raise ValueError("epoch_length must be >= 1")
    base = gld_value_gap_bound(p, step_size, steps)
    if batch_size == n:
        variance = 0.0
    else:
        gamma = second_moment_bound(p)
        bracket = (
            epoch_length
            * p.beta
            * p.smoothness**2
            * (n - batch_size)
            / (batch_size * (n - 1))
        ) * (
            9.0 * step_size * epoch_length * (p.smoothness**2 * gamma + p.gradient_bound**2)
            + p.dim / p.beta
        )
        variance = p.c1 * gamma * steps**0.75 * step_size * bracket**0.25
    return ErrorBound(
        variance_term=variance,
        mixing_term=base.mixing_term,
        discretization_term=p.c2 * step_size / p.beta,
        suboptimality_term=base.suboptimality_term,
    )


def geometric_step_budget(theta: float, gap: float, step_size: float, epsilon: float) -> int:
    """Smallest K with theta * e^{-gap K eta} <= epsilon / 2 (0 if already met).

    Real-valued solutions are rounded up; ties break upward too, since the
    bounds are one-sided.
    """
    if not theta > 0 or not gap > 0 or not step_size > 0 or not epsilon > 0:
        raise ValueError("theta, gap, step_size, and epsilon must all be positive")
    if epsilon >= 2.0 * theta:
        return 0
    return math.ceil(math.log(2.0 * theta / epsilon) / (gap * step_size))


def gld_step_budget(
    epsilon: float,
    p: TheoryParams,
    step_size: float,
    theta: Optional[float] = None,
    gap: Optional[float] = None,
) -> int:
    """Steps needed to push the mixing term below epsilon/2.

    Enforces the companion side condition c1 * eta / beta <= epsilon / 2
    and reports the maximal admissible step size when it fails.  ``theta``
    and ``gap`` default to the values computed from ``p``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    max_eta = epsilon * p.beta / (2.0 * p.c1)
    if step_size > max_eta:
        raise ValueError(
            f"step_size {step_size} violates the discretization side condition; "
            f"maximal admissible step size is {max_eta}"
        )
    if theta is None:
        theta = mixing_prefactor(p, step_size)
    if gap is None:
        gap = spectral_gap(p)
    return geometric_step_budget(theta, gap, step_size, epsilon)


@dataclass(frozen=True)
class BatchFloor:
    """Minibatch-size floor for the stochastic chain to reach a target
    accuracy; valid only up to an absolute constant, hence the flag."""

    value: float
    up_to_absolute_constant: bool = True

    def to_json_dict(self) -> dict:
        return {"value": self.value, "up_to_absolute_constant": self.up_to_absolute_constant}


def sgld_batch_floor(epsilon: float, dim: int, gap: float) -> BatchFloor:
    """d^6 / (gap^4 eps^4) * log^4(1/eps); requires 0 < eps < 1."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not gap > 0:
        raise ValueError("gap must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    value = dim**6 / (gap**4 * epsilon**4) * math.log(1.0 / epsilon) ** 4
    return BatchFloor(value=value)


@dataclass(frozen=True)
class VrSchedule:
    """Batch size and epoch length suggested for the variance-reduced chain."""

    batch_size: int
    epoch_length: int
    raw_batch: float
    raw_epoch: float
    batch_clamped: bool
    epoch_clamped: bool

    def to_json_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epoch_length": self.epoch_length,
            "raw_batch": self.raw_batch,
            "raw_epoch": self.raw_epoch,
            "batch_clamped": self.batch_clamped,
            "epoch_clamped": self.epoch_clamped,
        }


def vr_sgld_schedule(n: int, epsilon: float) -> VrSchedule:
    """B = sqrt(n) eps^{-3/2} clamped to [1, n]; L = max(1, sqrt(n) eps^{3/2}).

    Rounding is round-half-even; the unclamped product B*L equals n
    exactly, rounding aside.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    raw_batch = math.sqrt(n) * epsilon**-1.5
    raw_epoch = math.sqrt(n) * epsilon**1.5
    batch = min(n, max(1, round(raw_batch)))
    epoch = max(1, round(raw_epoch))
    return VrSchedule(
        batch_size=batch,
        epoch_length=epoch,
        raw_batch=raw_batch,
        raw_epoch=raw_epoch,
        batch_clamped=batch != round(raw_batch),
        epoch_clamped=round(raw_epoch) < 1,
    )


def gradient_complexity(
    algorithm,
    n: int,
    steps: int,
    batch_size: Optional[int] = None,
    epoch_length: Optional[int] = None,
) -> int:
    """Total component-gradient evaluations of a run.

    Full-gradient: n*K.  Minibatch: B*K.  Variance-reduced: B*K plus a
    full pass per started epoch, n*ceil(K/L).
    """
    from .dynamics import Algorithm

    algorithm = Algorithm.parse(algorithm)
    if steps < 0 or n < 1:
        raise ValueError("need steps >= 0 and n >= 1")
    if algorithm is Algorithm.GLD:
        return n * steps
    if batch_size is None or not 1 <= batch_size <= n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={n}]")
    if algorithm is Algorithm.SGLD:
        return batch_size * steps
    if epoch_length is None or epoch_length < 1:
        raise ValueError("vr-sgld needs epoch_length >= 1")
    return batch_size * steps + n * math.ceil(steps / epoch_length)


def safe_step_size(p: TheoryParams) -> float:
    """Documented safe step-size region min{1, m / (2 M^2)} under which the
    uniform second-moment bound holds."""
    return min(1.0, p.dissipativity_slope / (2.0 * p.smoothness**2))


def exp_moment_envelope(
    p: TheoryParams, step_size: float, steps: int, initial_sq_norm: float = 0.0
) -> float:
    """Linear-in-(K eta) envelope for log E[exp ||x_K||^2]:
    ||x_0||^2 + (2 beta (b + G^2) + 2 d) / (beta - 4 eta) * K eta.

    Valid for step_size < min(1, m/M^2) and
    beta >= max(2/(m - M^2 eta), 4 eta); raises outside that region.
    """
    m = p.dissipativity_slope
    if not 0 < step_size < 1 or step_size >= m / p.smoothness**2:
        raise ValueError("envelope requires step_size < min(1, m / M^2)")
    if p.beta < max(2.0 / (m - p.smoothness**2 * step_size), 4.0 * step_size):
        raise ValueError("envelope requires beta >= max(2/(m - M^2 eta), 4 eta)")
    rate = (
        2.0 * p.beta * (p.dissipativity_offset + p.gradient_bound**2) + 2.0 * p.dim
    ) / (p.beta - 4.0 * step_size)
    return initial_sq_norm + rate * steps * step_size


def budget_report(
    p: TheoryParams,
    n: int,
    epsilon: float,
    step_size: Optional[float] = None,
) -> dict:
    """Side-by-side budget table for the three algorithms.

    Reports the problem constants, the per-algorithm suggested
    steps/batch/epoch derived from the budget formulas (clamp decisions
    included), and the resulting gradient complexities.  The default step
    size is the safe region capped by the budget side condition.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    side_cap = epsilon * p.beta / (2.0 * p.c1)
    if step_size is None:
        step_size = min(safe_step_size(p), side_cap)
    gap = spectral_gap(p)
    theta = mixing_prefactor(p, step_size)
    steps = gld_step_budget(epsilon, p, step_size, theta=theta, gap=gap)

    floor = sgld_batch_floor(epsilon, p.dim, gap) if 0 < epsilon < 1 else None
    if floor is None:
        sgld_batch = n
        sgld_batch_clamped = False
    else:
        sgld_batch = min(n, max(1, math.ceil(floor.value)))
        sgld_batch_clamped = sgld_batch != math.ceil(floor.value)

    schedule = vr_sgld_schedule(n, epsilon) if 0 < epsilon < 1 else None
    if schedule is None:
        vr_batch, vr_epoch = n, 1
    else:
        vr_batch, vr_epoch = schedule.batch_size, schedule.epoch_length
    vr_steps = steps if steps % vr_epoch == 0 else steps + (vr_epoch - steps % vr_epoch)

    return {
        "inputs": {
            "params": p.to_json_dict(),
            "n": n,
            "epsilon": epsilon,
            "step_size": step_size,
        },
        "constants": {
            "spectral_gap": gap,
            "mixing_prefactor": theta,
            "mixing_condition": p.mixing_condition,
            "second_moment_bound": second_moment_bound(p),
            "gradient_bound": p.gradient_bound,
            "gibbs_suboptimality_bound": gibbs_suboptimality_bound(p),
            "gibbs_suboptimality_bound_slope": gibbs_suboptimality_bound_slope(p),
            "safe_step_size": safe_step_size(p),
        },
        "algorithms": {
            "gld": {
                "steps": steps,
                "gradient_complexity": gradient_complexity("gld", n, steps),
            },
            "sgld": {
                "steps": steps,
                "batch_size": sgld_batch,
                "batch_floor": None if floor is None else floor.to_json_dict(),
                "batch_clamped": sgld_batch_clamped,
                "gradient_complexity": gradient_complexity("sgld", n, steps, sgld_batch),
            },
            "vr-sgld": {
                "steps": vr_steps,
                "batch_size": vr_batch,
                "epoch_length": vr_epoch,
                "schedule": None if schedule is None else schedule.to_json_dict(),
                "gradient_complexity": gradient_complexity(
                    "vr-sgld", n, vr_steps, vr_batch, vr_epoch
                ),
            },
        },
    }
