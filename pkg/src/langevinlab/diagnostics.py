"""Brute-force and quadrature oracles for checking the samplers.

Everything here is deliberately independent of the sampler implementations:
the Gibbs table integrates exp(-beta F) on a tensor grid, the variance
probes enumerate (or Monte-Carlo sample) index subsets directly, and the
minimizer search is a grid scan plus descent polish.  These oracles are
what the acceptance checks compare the dynamics against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import ChainState, semi_stochastic_gradient
from .objectives import FiniteSumObjective

__all__ = [
    "GibbsTable",
    "gibbs_quadrature",
    "default_box",
    "gibbs_expectation",
    "gibbs_value_gap",
    "EmpiricalDensity",
    "empirical_density",
    "total_variation",
    "gibbs_total_variation",
    "sample_from_table",
    "MinimizerResult",
    "find_global_min",
    "MinibatchVarianceReport",
    "minibatch_variance_probe",
    "VrVarianceReport",
    "vr_variance_probe",
    "MomentTracker",
    "ar1_stationary_variance",
]

EXHAUSTIVE_SUBSET_CAP = 1_000_000
BOUNDARY_MASS_RATIO = 1e-10


# -- Gibbs quadrature -----------------------------------------------------------


@dataclass(frozen=True)
class GibbsTable:
    """Tensor-grid quadrature of the Gibbs density exp(-beta F)/Q.

    ``density`` holds normalized node values; ``trap_weights`` are the
    trapezoid quadrature weights (cell volume folded in), so
    ``sum(trap_weights * density) == 1`` by construction and expectations
    are plain weighted sums.
    """

    axes: tuple
    beta: float
    f_values: np.ndarray
    density: np.ndarray
    log_partition: float
    partition_value: float
    cell_volume: float
    trap_weights: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def node_points(self) -> np.ndarray:
        """Grid nodes flattened to an (m, dim) array in C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def write_csv(self, path) -> None:
        """Density table as CSV: one row per node, coordinates then density."""
        pts = self.node_points()
        dens = self.density.ravel()
        header = ",".join(["x", "y"][: self.dim] + ["density"])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row, d in zip(pts, dens):
                coords = ",".join(repr(float(c)) for c in row)
                fh.write(f"{coords},{d!r}\n")


def _trap_axis_weights(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    w = np.full(axis.shape, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def default_box(obj: FiniteSumObjective, beta: float) -> list:
    """Per-axis [-3 sqrt(Gamma), 3 sqrt(Gamma)] box from the second-moment
    bound of the certificate."""
    cert = obj.certificate
    m = cert.dissipativity_slope
    gamma = 2.0 * (1.0 + 1.0 / m) * (
        cert.dissipativity_offset + 2.0 * cert.gradient_bound**2 + obj.dim / beta
    )
    half = 3.0 * math.sqrt(gamma)
    return [(-half, half)] * obj.dim


def gibbs_quadrature(
    obj: FiniteSumObjective,
    beta: float,
    box: Optional[Sequence] = None,
    points_per_axis: int = 256,
    auto_widen: Optional[bool] = None,
    max_widenings: int = 8,
) -> GibbsTable:
    """Tabulate the normalized Gibbs density on a tensor grid (dim <= 2).

    The box must be wide enough that the boundary density is below 1e-10
    of the peak; with ``auto_widen`` (the default when no box is given)
    the box is doubled until that check passes, otherwise a too-small box
    raises.
    """
    if obj.dim > 2:
        raise ValueError("quadrature tables are limited to dim <= 2")
    if points_per_axis < 16:
        raise ValueError("points_per_axis must be >= 16")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if box is None:
        box = default_box(obj, beta)
        if auto_widen is None:
            auto_widen = True
    box = [(float(lo), float(hi)) for lo, hi in np.atleast_2d(np.asarray(box, dtype=float))]
    if len(box) != obj.dim:
        raise ValueError(f"box must give (lo, hi) per axis; expected {obj.dim} pairs")
    auto_widen = bool(auto_widen)

    for attempt in range(max_widenings + 1):
        axes = tuple(np.linspace(lo, hi, points_per_axis) for lo, hi in box)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        f_vals = obj.value_many(pts).reshape([points_per_axis] * obj.dim)
        log_w = -beta * f_vals
        shift = float(log_w.max())
        w = np.exp(log_w - shift)

        axis_weights = [_trap_axis_weights(a) for a in axes]
        if obj.dim == 1:
            trap = axis_weights[0]
        else:
            trap = np.outer(axis_weights[0], axis_weights[1])
        raw = float(np.sum(trap * w))
        log_partition = shift + math.log(raw)
        density = np.exp(log_w - log_partition)

        boundary = np.zeros(density.shape, dtype=bool)
        for axis in range(obj.dim):
            index = [slice(None)] * obj.dim
            index[axis] = 0
            boundary[tuple(index)] = True
            index[axis] = -1
            boundary[tuple(index)] = True
        peak = float(density.max())
        boundary_peak = float(density[boundary].max())
        if boundary_peak <= BOUNDARY_MASS_RATIO * peak:
            cell_volume = float(np.prod([a[1] - a[0] for a in axes]))
            return GibbsTable(
                axes=axes,
                beta=beta,
                f_values=f_vals,
                density=density,
                log_partition=log_partition,
                partition_value=math.exp(log_partition),
                cell_volume=cell_volume,
                trap_weights=trap,
            )
        if not auto_widen:
            raise ValueError(
                f"box too small: boundary density is {boundary_peak / peak:.2e} of the "
                f"peak (limit {BOUNDARY_MASS_RATIO:.0e})"
            )
        box = [(2.0 * lo, 2.0 * hi) for lo, hi in box]
    raise ValueError(f"boundary-mass check still failing after {max_widenings} widenings")


def gibbs_expectation(table: GibbsTable, g) -> float:
    """Trapezoid-weighted expectation of ``g`` under the table's density.

    ``g`` may be an array of node values (matching the table shape) or a
    callable receiving the flattened (m, dim) node array.
    """
    if callable(g):
        vals = np.asarray(g(table.node_points()), dtype=float).reshape(table.density.shape)
    else:
        vals = np.asarray(g, dtype=float)
        if vals.shape != table.density.shape:
            raise ValueError(f"value grid shape {vals.shape} != table shape {table.density.shape}")
    return float(np.sum(table.trap_weights * table.density * vals))


def gibbs_value_gap(table: GibbsTable, f_star: float) -> float:
    """E_pi[F] - F(x*) from the tabulated objective values."""
    return gibbs_expectation(table, table.f_values) - f_star


# -- empirical densities and total variation --------------------------------------


@dataclass(frozen=True)
class EmpiricalDensity:
    """Histogram density on a table's node-centred cells."""

    density: np.ndarray
    sample_count: int
    outside_fraction: float

    @property
    def outside_warning(self) -> bool:
        return self.outside_fraction > 0.01


def _cell_edges(axis: np.ndarray) -> np.ndarray:
    h = axis[1] - axis[0]
    return np.linspace(axis[0] - 0.5 * h, axis[-1] + 0.5 * h, len(axis) + 1)


def empirical_density(
    samples: np.ndarray, table: GibbsTable, min_samples: int = 10_000
) -> EmpiricalDensity:
    """Normalized histogram of samples over the table's node cells.

    Cells are centred on the quadrature nodes so the result is directly
    comparable to ``table.density``.  Samples outside the (half-cell
    padded) box are dropped; a fraction above 1% flags a warning on the
    report.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[1] != table.dim:
        raise ValueError(f"samples have dim {samples.shape[1]}, table has dim {table.dim}")
    total = samples.shape[0]
    if total < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {total}")

    edges = [_cell_edges(a) for a in table.axes]
    if table.dim == 1:
        counts, _ = np.histogram(samples[:, 0], bins=edges[0])
    else:
        counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=edges)
    inside = int(counts.sum())
    if inside == 0:
        raise ValueError("no samples fall inside the table's box")
    density = counts / (inside * table.cell_volume)
    return EmpiricalDensity(
        density=density,
        sample_count=total,
        outside_fraction=1.0 - inside / total,
    )


def total_variation(p: np.ndarray, q: np.ndarray, cell_volume: float) -> float:
    """(1/2) sum |p - q| * cell volume for two densities on one grid."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"density shapes differ: {p.shape} vs {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q))) * cell_volume


def gibbs_total_variation(table: GibbsTable, empirical: EmpiricalDensity) -> float:
    return total_variation(table.density, empirical.density, table.cell_volume)


def sample_from_table(table: GibbsTable, count: int, rng) -> np.ndarray:
    """Draw iid samples from a 1-d table's piecewise-constant density."""
    if table.dim != 1:
        raise ValueError("table sampling is implemented for dim == 1 only")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    weights = table.density * table.cell_volume
    weights = weights / weights.sum()
    cells = rng.choice(len(weights), size=count, p=weights)
    h = table.cell_volume
    lo = table.axes[0][cells] - 0.5 * h
    return lo + h * rng.random(count)


# -- global minimizer ------------------------------------------------------------


@dataclass(frozen=True)
class MinimizerResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int


def find_global_min(
    obj: FiniteSumObjective,
    box: Optional[Sequence] = None,
    coarse_points: int = 201,
    refine_iters: int = 500,
    grad_tol: float = 1e-8,
) -> MinimizerResult:
    """Coarse grid scan plus descent polish down to ``grad_tol``.

    The box must contain the ball of radius sqrt(b/m), which contains the
    global minimizer by dissipativity; the default box pads that ball by
    one unit per side.
    """
    if obj.dim > 2:
        raise ValueError("grid-based minimizer search is limited to dim <= 2")
    cert = obj.certificate
    radius = math.sqrt(cert.dissipativity_offset / cert.dissipativity_slope)
    if box is None:
        half = radius + 1.0
        box = [(-half, half)] * obj.dim
    box = [(float(lo), float(hi)) for lo, hi in np.atleast_2d(np.asarray(box, dtype=float))]
    for lo, hi in box:
        if lo > -radius or hi < radius:
            raise ValueError(
                f"box {box} does not contain the dissipativity ball of radius {radius:.6g}"
            )

    axes = [np.linspace(lo, hi, coarse_points) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = obj.value_many(pts)
    x = pts[int(np.argmin(vals))].copy()

    step = 1.0 / cert.smoothness
    iterations = 0
    grad_norm = float(np.linalg.norm(obj.full_gradient(x)))
    for iterations in range(1, refine_iters + 1):
        grad = obj.full_gradient(x)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= grad_tol:
            break
        fx = obj.value(x)
        trial_step = step
        for _ in range(40):
            candidate = x - trial_step * grad
            if obj.value(candidate) <= fx - 0.5 * trial_step * grad_norm**2:
                x = candidate
                break
            trial_step *= 0.5
        else:
            break
    if grad_norm > grad_tol:
        raise RuntimeError(
            f"minimizer refinement stalled at gradient norm {grad_norm:.3e} "
            f"(tolerance {grad_tol:.1e}) after {iterations} iterations"
        )
    # Polish with plain 1/M steps (monotone for smooth objectives) until the
    # gradient norm hits its floating-point floor, so the located point is
    # stable well below the requested tolerance, e.g. under half-cell grid
    # shifts.
    grad = obj.full_gradient(x)
    grad_norm = float(np.linalg.norm(grad))
    for _ in range(200):
        candidate = x - step * grad
        grad_candidate = obj.full_gradient(candidate)
        norm_candidate = float(np.linalg.norm(grad_candidate))
        if norm_candidate >= grad_norm:
            break
        x, grad, grad_norm = candidate, grad_candidate, norm_candidate
    return MinimizerResult(x=x, value=obj.value(x), grad_norm=grad_norm, iterations=iterations)


# -- minibatch variance probes -----------------------------------------------------


def _subset_iterator(n: int, batch_size: int, mode: str, draws: int, seed: int):
    if mode == "exhaustive":
        if math.comb(n, batch_size) > EXHAUSTIVE_SUBSET_CAP:
            raise ValueError(
                f"C({n},{batch_size}) = {math.comb(n, batch_size)} exceeds the exhaustive "
                f"cap {EXHAUSTIVE_SUBSET_CAP}; use montecarlo mode"
            )
        return (np.array(c) for c in itertools.combinations(range(n), batch_size))
    if mode == "montecarlo":
        from .dynamics import sample_index_subset

        rng = np.random.default_rng(seed)
        return (sample_index_subset(n, batch_size, rng) for _ in range(draws))
    raise ValueError(f"unknown probe mode {mode!r}")


@dataclass(frozen=True)
class MinibatchVarianceReport:
    """Measured subset-mean gradient variance against the exact identity.

    ``predicted`` is (n-B)/(B(n-1)) * mean ||grad F - grad f_i||^2 and
    ``bound`` the coarser 4(n-B)(M||x|| + G)^2/(B(n-1)); ``ratio`` is
    measured/predicted (NaN when both vanish at full batch).
    """

    n: int
    batch_size: int
    mode: str
    draws: int
    measured: float
    predicted: float
    ratio: float
    bound: float
    standard_error: Optional[float]

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "batch_size": self.batch_size,
            "mode": self.mode,
            "draws": self.draws,
            "measured": self.measured,
            "predicted": self.predicted,
            "ratio": None if math.isnan(self.ratio) else self.ratio,
            "bound": self.bound,
            "standard_error": self.standard_error,
        }


def minibatch_variance_probe(
    obj: FiniteSumObjective,
    x,
    batch_size: int,
    mode: str = "exhaustive",
    draws: int = 10_000,
    seed: int = 0,
) -> MinibatchVarianceReport:
    """Second moment of the minibatch-mean gradient deviation at ``x``.

    Exhaustive mode averages over every C(n, B) subset (the oracle for
    the without-replacement variance identity); Monte Carlo mode draws
    subsets and reports a standard error alongside.
    """
    n = obj.n
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={n}]")
    x = np.asarray(x, dtype=np.float64)
    grads = obj.component_gradients(np.arange(n), x)
    full = grads.mean(axis=0)
    deviations = full[None, :] - grads

    values = []
    count = 0
    for idx in _subset_iterator(n, batch_size, mode, draws, seed):
        dev = grads[idx].mean(axis=0) - full
        values.append(float(dev @ dev))
        count += 1
    measured = math.fsum(values) / count

    if batch_size == n:
        predicted = 0.0
        bound = 0.0
    else:
        mean_sq = math.fsum(float(u @ u) for u in deviations) / n
        factor = (n - batch_size) / (batch_size * (n - 1))
        predicted = factor * mean_sq
        cert = obj.certificate
        bound = (
            4.0
            * (n - batch_size)
            * (cert.smoothness * float(np.linalg.norm(x)) + cert.gradient_bound) ** 2
            / (batch_size * (n - 1))
        )
    ratio = measured / predicted if predicted > 0.0 else math.nan
    if mode == "montecarlo" and count > 1:
        arr = np.asarray(values)
        standard_error = float(arr.std(ddof=1) / math.sqrt(count))
    else:
        standard_error = None
    return MinibatchVarianceReport(
        n=n,
        batch_size=batch_size,
        mode=mode,
        draws=count,
        measured=measured,
        predicted=predicted,
        ratio=ratio,
        bound=bound,
        standard_error=standard_error,
    )


@dataclass(frozen=True)
class VrVarianceReport:
    """Semi-stochastic-gradient variance against the smoothness bound."""

    n: int
    batch_size: int
    mode: str
    draws: int
    measured: float
    bound: float
    unbiasedness_residual: float
    snapshot_distance_sq: float
    standard_error: Optional[float]

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "batch_size": self.batch_size,
            "mode": self.mode,
            "draws": self.draws,
            "measured": self.measured,
            "bound": self.bound,
            "unbiasedness_residual": self.unbiasedness_residual,
            "snapshot_distance_sq": self.snapshot_distance_sq,
            "standard_error": self.standard_error,
        }


def vr_variance_probe(
    obj: FiniteSumObjective,
    x,
    snapshot,
    batch_size: int,
    mode: str = "exhaustive",
    draws: int = 10_000,
    seed: int = 0,
) -> VrVarianceReport:
    """Variance and bias of the variance-reduced gradient estimate.

    Enumerates (or samples) subsets, evaluates the production estimator
    for each, and reports its second moment about the true gradient, the
    residual of the subset-average against the true gradient, and the
    smoothness bound M^2 (n-B)/(B(n-1)) ||x - snapshot||^2.
    """
    n = obj.n
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={n}]")
    x = np.asarray(x, dtype=np.float64)
    snapshot = np.asarray(snapshot, dtype=np.float64)
    full_x = obj.full_gradient(x)
    snapshot_grad = obj.full_gradient(snapshot)

    values = []
    mean_estimate = np.zeros(obj.dim)
    count = 0
    for idx in _subset_iterator(n, batch_size, mode, draws, seed):
        est = semi_stochastic_gradient(obj, x, snapshot, snapshot_grad, idx)
        dev = est - full_x
        values.append(float(dev @ dev))
        mean_estimate += est
        count += 1
    measured = math.fsum(values) / count
    mean_estimate /= count
    residual = float(np.linalg.norm(mean_estimate - full_x))

    dist_sq = float(np.sum((x - snapshot) ** 2))
    if batch_size == n:
        bound = 0.0
    else:
        cert = obj.certificate
        bound = cert.smoothness**2 * (n - batch_size) / (batch_size * (n - 1)) * dist_sq
    if mode == "montecarlo" and count > 1:
        arr = np.asarray(values)
        standard_error = float(arr.std(ddof=1) / math.sqrt(count))
    else:
        standard_error = None
    return VrVarianceReport(
        n=n,
        batch_size=batch_size,
        mode=mode,
        draws=count,
        measured=measured,
        bound=bound,
        unbiasedness_residual=residual,
        snapshot_distance_sq=dist_sq,
        standard_error=standard_error,
    )


# -- moment tracking ----------------------------------------------------------------


class MomentTracker:
    """Running moments of a chain: F(x), ||x||^2, their prefix means, and a
    streaming overflow-safe log-mean-exp of ||x||^2.

    The prefix means are exact (running sums over observed steps); the
    log-mean-exp accumulator shifts by the running max so large squared
    norms never overflow.
    """

    name = "moments"

    def __init__(self, stride: int = 0):
        self.stride = stride
        self._count = 0
        self._sum_value = 0.0
        self._sum_sq_norm = 0.0
        self.sup_running_mean_value = -math.inf
        self.sup_running_mean_sq_norm = -math.inf
        self.max_sq_norm = -math.inf
        self._lse_shift = -math.inf
        self._lse_sum = 0.0
        self.series: list = []

    def observe(self, state: ChainState, obj: FiniteSumObjective) -> None:
        sq = float(state.x @ state.x)
        value = obj.value(state.x)
        self._count += 1
        self._sum_value += value
        self._sum_sq_norm += sq
        mean_value = self._sum_value / self._count
        mean_sq = self._sum_sq_norm / self._count
        self.sup_running_mean_value = max(self.sup_running_mean_value, mean_value)
        self.sup_running_mean_sq_norm = max(self.sup_running_mean_sq_norm, mean_sq)
        self.max_sq_norm = max(self.max_sq_norm, sq)
        if sq > self._lse_shift:
            self._lse_sum = self._lse_sum * math.exp(self._lse_shift - sq) + 1.0
            self._lse_shift = sq
        else:
            self._lse_sum += math.exp(sq - self._lse_shift)
        if self.stride and state.step_count % self.stride == 0:
            self.series.append(
                {
                    "k": state.step_count,
                    "value": value,
                    "sq_norm": sq,
                    "running_mean_value": mean_value,
                    "running_mean_sq_norm": mean_sq,
                }
            )

    @property
    def count(self) -> int:
        return self._count

    @property
    def running_mean_value(self) -> float:
        return self._sum_value / self._count if self._count else math.nan

    @property
    def running_mean_sq_norm(self) -> float:
        return self._sum_sq_norm / self._count if self._count else math.nan

    def log_mean_exp_sq_norm(self) -> float:
        """Streaming log((1/K) sum_k exp ||x_k||^2)."""
        if self._count == 0:
            return math.nan
        return self._lse_shift + math.log(self._lse_sum / self._count)

    def summary(self) -> dict:
        return {
            "steps": self._count,
            "running_mean_value": self.running_mean_value,
            "running_mean_sq_norm": self.running_mean_sq_norm,
            "sup_running_mean_value": self.sup_running_mean_value,
            "sup_running_mean_sq_norm": self.sup_running_mean_sq_norm,
            "max_sq_norm": self.max_sq_norm,
            "log_mean_exp_sq_norm": self.log_mean_exp_sq_norm(),
        }


def ar1_stationary_variance(step_size: float, beta: float) -> float:
    """Per-coordinate stationary variance of the linear chain
    x <- (1 - eta) x + sqrt(2 eta / beta) eps, i.e. the exact law of the
    full-gradient sampler on a unit quadratic bowl:
    (2 eta / beta) / (1 - (1 - eta)^2) = 1 / (beta (1 - eta/2))."""
    if not 0 < step_size < 2:
        raise ValueError("step_size must lie in (0, 2) for the chain to be stable")
    return (2.0 * step_size / beta) / (1.0 - (1.0 - step_size) ** 2)
