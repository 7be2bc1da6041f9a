"""Discretized Langevin samplers over finite-sum objectives.

Three update rules share the additive-noise Euler step
``x <- x - eta * drift(x) + sqrt(2 eta / beta) * eps``:

* full-gradient (GLD): drift is the exact mean gradient;
* minibatch (SGLD): drift is the mean gradient over a uniform
  without-replacement index subset of size B;
* variance-reduced (VR-SGLD): drift is the semi-stochastic gradient
  anchored at a periodic snapshot, recentred by the snapshot's full
  gradient.

All randomness flows through :class:`NoiseSource`, and gradient work is
metered on :class:`ChainState` (a full-gradient pass costs n component
evaluations).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .objectives import FiniteSumObjective

__all__ = [
    "Algorithm",
    "SamplerConfig",
    "ChainState",
    "NoiseSource",
    "initial_state",
    "sample_index_subset",
    "semi_stochastic_gradient",
    "gld_step",
    "sgld_step",
    "vr_sgld_step",
    "take_snapshot",
    "run",
    "RunResult",
    "TraceRecorder",
    "SampleRecorder",
    "gld_samples",
]


class Algorithm(str, Enum):
    GLD = "gld"
    SGLD = "sgld"
    VR_SGLD = "vr-sgld"

    @classmethod
    def parse(cls, value) -> "Algorithm":
        if isinstance(value, Algorithm):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown algorithm {value!r}; expected one of "
                f"{[a.value for a in cls]}"
            ) from None


@dataclass(frozen=True)
class SamplerConfig:
    """Static description of one chain.

    ``batch_size`` applies to the stochastic algorithms only and
    ``epoch_length`` to the variance-reduced one; fields irrelevant to the
    chosen algorithm are ignored.  Validation is separate from
    construction so a harness can collect every error in a plan at once.
    """

    algorithm: Algorithm
    step_size: float
    beta: float
    steps: int
    batch_size: Optional[int] = None
    epoch_length: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))

    def validation_errors(self, n: int) -> list:
        errors = []
        if not self.step_size > 0:
            errors.append(f"step_size must be positive, got {self.step_size}")
        if not self.beta > 0:
            errors.append(f"beta must be positive, got {self.beta}")
        if self.steps < 0:
            errors.append(f"steps must be nonnegative, got {self.steps}")
        if self.algorithm in (Algorithm.SGLD, Algorithm.VR_SGLD):
            if self.batch_size is None:
                errors.append(f"{self.algorithm.value} requires batch_size")
            elif not 1 <= self.batch_size <= n:
                errors.append(
                    f"batch_size {self.batch_size} outside [1, n={n}]"
                )
        if self.algorithm is Algorithm.VR_SGLD:
            if self.epoch_length is None:
                errors.append("vr-sgld requires epoch_length")
            elif self.epoch_length < 1:
                errors.append(f"epoch_length must be >= 1, got {self.epoch_length}")
            elif self.steps % self.epoch_length != 0:
                errors.append(
                    f"steps {self.steps} not divisible by epoch_length {self.epoch_length}"
                )
        return errors

    def validate(self, n: int) -> "SamplerConfig":
        errors = self.validation_errors(n)
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def to_json_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm.value,
            "step_size": self.step_size,
            "beta": self.beta,
            "steps": self.steps,
            "seed": self.seed,
        }
        if self.batch_size is not None:
            out["batch_size"] = self.batch_size
        if self.epoch_length is not None:
            out["epoch_length"] = self.epoch_length
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "SamplerConfig":
        return cls(
            algorithm=Algorithm.parse(data["algorithm"]),
            step_size=float(data["step_size"]),
            beta=float(data["beta"]),
            steps=int(data["steps"]),
            batch_size=None if data.get("batch_size") is None else int(data["batch_size"]),
            epoch_length=None if data.get("epoch_length") is None else int(data["epoch_length"]),
            seed=int(data.get("seed", 0)),
        )


class NoiseSource:
    """Seeded randomness for the samplers.

    Two independent substreams are derived from the seed: one yields the
    per-step standard Gaussian vectors, the other the minibatch index
    subsets.  Every step draws its Gaussian first and its subset second.
    Because the substreams are independent, algorithms that never draw
    subsets (full-gradient) consume exactly the same Gaussian sequence as
    algorithms that do, which is what makes the full-batch degeneracy
    checks bit-exact.  Identical seeds yield identical streams.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        gauss_seq, subset_seq = np.random.SeedSequence(self.seed).spawn(2)
        self._gauss = np.random.Generator(np.random.PCG64(gauss_seq))
        self._subset = np.random.Generator(np.random.PCG64(subset_seq))

    def gaussian(self, dim: int) -> np.ndarray:
        return self._gauss.standard_normal(dim)

    def gaussian_block(self, rows: int, dim: int) -> np.ndarray:
        """Block of ``rows`` consecutive Gaussian draws; identical to that
        many successive :meth:`gaussian` calls on the same stream."""
        return self._gauss.standard_normal((rows, dim))

    def index_subset(self, n: int, batch_size: int) -> np.ndarray:
        return sample_index_subset(n, batch_size, self._subset)


def sample_index_subset(n: int, batch_size: int, rng) -> np.ndarray:
    """Uniform without-replacement subset of {0..n-1}, returned sorted.

    Partial Fisher-Yates over the index pool: exactly uniform over all
    C(n, B) subsets with O(B) draws.  ``rng`` may be a numpy Generator or
    a :class:`NoiseSource`.
    """
    if isinstance(rng, NoiseSource):
        return rng.index_subset(n, batch_size)
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={n}]")
    pool = np.arange(n)
    for j in range(batch_size):
        r = j + int(rng.integers(n - j))
        pool[j], pool[r] = pool[r], pool[j]
    out = np.sort(pool[:batch_size])
    return out


@dataclass
class ChainState:
    """Mutable per-chain state: iterate, counters, optional snapshot."""

    x: np.ndarray
    algorithm: Algorithm
    step_count: int = 0
    snapshot: Optional[np.ndarray] = None
    snapshot_grad: Optional[np.ndarray] = None
    grad_evals: int = 0


def initial_state(obj: FiniteSumObjective, algorithm, x0=None) -> ChainState:
    """Fresh chain state; the default initial iterate is the zero vector."""
    algorithm = Algorithm.parse(algorithm)
    if x0 is None:
        x = np.zeros(obj.dim)
    else:
        x = np.array(x0, dtype=np.float64, copy=True)
        if x.shape != (obj.dim,):
            raise ValueError(f"x0 must have shape ({obj.dim},), got {x.shape}")
    return ChainState(x=x, algorithm=algorithm)


def _check_step_params(step_size: float, beta: float) -> None:
    # A zero step size is tolerated here (the update degenerates to pure
    # noise scaling sqrt(0) = 0); config validation is what rejects it.
    if step_size < 0:
        raise ValueError(f"step_size must be nonnegative, got {step_size}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def gld_step(
    state: ChainState,
    obj: FiniteSumObjective,
    step_size: float,
    beta: float,
    noise,
) -> ChainState:
    """One full-gradient step: x - eta*gradF(x) + sqrt(2 eta/beta)*eps."""
    _check_step_params(step_size, beta)
    eps = noise.gaussian(obj.dim)
    drift = obj.full_gradient(state.x)
    state.x = state.x - step_size * drift + math.sqrt(2.0 * step_size / beta) * eps
    state.step_count += 1
    state.grad_evals += obj.n
    return state


def sgld_step(
    state: ChainState,
    obj: FiniteSumObjective,
    step_size: float,
    beta: float,
    batch_size: int,
    noise,
) -> ChainState:
    """One minibatch step; the subset is drawn after the Gaussian."""
    _check_step_params(step_size, beta)
    if not 1 <= batch_size <= obj.n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={obj.n}]")
    eps = noise.gaussian(obj.dim)
    idx = noise.index_subset(obj.n, batch_size)
    drift = obj.gradient_over(idx, state.x)
    state.x = state.x - step_size * drift + math.sqrt(2.0 * step_size / beta) * eps
    state.step_count += 1
    state.grad_evals += batch_size
    return state


def semi_stochastic_gradient(
    obj: FiniteSumObjective,
    x: np.ndarray,
    snapshot: np.ndarray,
    snapshot_grad: np.ndarray,
    indices: np.ndarray,
) -> np.ndarray:
    """Variance-reduced gradient estimate at ``x`` anchored at ``snapshot``.

    Evaluated as batch_mean(x) + (snapshot_grad - batch_mean(snapshot)),
    an exact regrouping of the per-index form: with a full batch the
    correction cancels bitwise, and when ``x`` equals the snapshot the
    estimate is identically ``snapshot_grad`` for every subset, so that
    case is short-circuited.
    """
    if np.array_equal(x, snapshot):
        return snapshot_grad
    return obj.gradient_over(indices, x) + (
        snapshot_grad - obj.gradient_over(indices, snapshot)
    )


def vr_sgld_step(
    state: ChainState,
    obj: FiniteSumObjective,
    step_size: float,
    beta: float,
    batch_size: int,
    noise,
) -> ChainState:
    """One variance-reduced step against the current snapshot.

    Charges ``batch_size`` gradient evaluations: the paired component
    gradients at the iterate and at the snapshot count as one indexed
    access, and the snapshot's full gradient was paid when the snapshot
    was taken.
    """
    _check_step_params(step_size, beta)
    if state.snapshot is None or state.snapshot_grad is None:
        raise ValueError("vr_sgld_step requires a snapshot; call take_snapshot first")
    if not 1 <= batch_size <= obj.n:
        raise ValueError(f"batch_size {batch_size} outside [1, n={obj.n}]")
    eps = noise.gaussian(obj.dim)
    idx = noise.index_subset(obj.n, batch_size)
    drift = semi_stochastic_gradient(obj, state.x, state.snapshot, state.snapshot_grad, idx)
    state.x = state.x - step_size * drift + math.sqrt(2.0 * step_size / beta) * eps
    state.step_count += 1
    state.grad_evals += batch_size
    return state


def take_snapshot(state: ChainState, obj: FiniteSumObjective) -> ChainState:
    """Anchor the variance-reduced chain at its current iterate.

    Stores the iterate and its full gradient; costs n gradient
    evaluations.
    """
    if state.algorithm is not Algorithm.VR_SGLD:
        raise ValueError(f"snapshots only apply to vr-sgld chains, not {state.algorithm.value}")
    state.snapshot = state.x.copy()
    state.snapshot_grad = obj.full_gradient(state.x)
    state.grad_evals += obj.n
    return state


@dataclass
class RunResult:
    """Summary of one completed chain."""

    config: SamplerConfig
    final_x: np.ndarray
    steps_run: int
    grad_evals: int
    elapsed_seconds: float
    tracker_summaries: dict = field(default_factory=dict)

    def to_json_dict(self, include_timing: bool = True) -> dict:
        out = {
            "config": self.config.to_json_dict(),
            "final_x": self.final_x.tolist(),
            "steps_run": self.steps_run,
            "grad_evals": self.grad_evals,
            "tracker_summaries": self.tracker_summaries,
        }
        if include_timing:
            out["elapsed_seconds"] = self.elapsed_seconds
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_json_dict(include_timing), indent=2, sort_keys=True)


class TraceRecorder:
    """Per-step trace of (k, F(x), ||x||^2, grad_evals), optionally strided.

    ``write_csv`` emits the fixed column layout ``k,f_value,sq_norm,
    grad_evals``.
    """

    name = "trace"

    def __init__(self, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride
        self.rows: list = []

    def observe(self, state: ChainState, obj: FiniteSumObjective) -> None:
        if state.step_count % self.stride == 0:
            self.rows.append(
                (
                    state.step_count,
                    obj.value(state.x),
                    float(state.x @ state.x),
                    state.grad_evals,
                )
            )

    def summary(self) -> dict:
        return {"rows": len(self.rows), "stride": self.stride}

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,f_value,sq_norm,grad_evals\n")
            for k, f, sq, ge in self.rows:
                fh.write(f"{k},{f!r},{sq!r},{ge}\n")


class SampleRecorder:
    """Collects post-burn-in iterates, thinned to every ``thin``-th step."""

    name = "samples"

    def __init__(self, burn_in: int = 0, thin: int = 1):
        if burn_in < 0 or thin < 1:
            raise ValueError("burn_in must be >= 0 and thin >= 1")
        self.burn_in = burn_in
        self.thin = thin
        self._kept: list = []

    def observe(self, state: ChainState, obj: FiniteSumObjective) -> None:
        k = state.step_count
        if k > self.burn_in and (k - self.burn_in - 1) % self.thin == 0:
            self._kept.append(state.x.copy())

    def samples(self) -> np.ndarray:
        return np.asarray(self._kept)

    def summary(self) -> dict:
        return {"kept": len(self._kept), "burn_in": self.burn_in, "thin": self.thin}


def run(
    config: SamplerConfig,
    obj: FiniteSumObjective,
    trackers: Sequence = (),
    x0=None,
) -> RunResult:
    """Drive a chain for ``config.steps`` updates.

    The variance-reduced algorithm takes a snapshot at the start of every
    epoch (the first snapshot anchors the initial iterate).  Each tracker's
    ``observe(state, obj)`` runs after every step; summaries are gathered
    from trackers exposing ``summary()``.

    A chain is single-threaded and its trackers are chain-local; multiple
    chains with independent noise sources may run concurrently against one
    shared objective.
    """
    config.validate(obj.n)
    state = initial_state(obj, config.algorithm, x0=x0)
    noise = NoiseSource(config.seed)
    eta, beta = config.step_size, config.beta
    started = time.perf_counter()

    if config.algorithm is Algorithm.GLD:
        for _ in range(config.steps):
            gld_step(state, obj, eta, beta, noise)
            for tracker in trackers:
                tracker.observe(state, obj)
    elif config.algorithm is Algorithm.SGLD:
        for _ in range(config.steps):
            sgld_step(state, obj, eta, beta, config.batch_size, noise)
            for tracker in trackers:
                tracker.observe(state, obj)
    else:
        epochs = config.steps // config.epoch_length
        for _ in range(epochs):
            take_snapshot(state, obj)
            for _ in range(config.epoch_length):
                vr_sgld_step(state, obj, eta, beta, config.batch_size, noise)
                for tracker in trackers:
                    tracker.observe(state, obj)

    elapsed = time.perf_counter() - started
    summaries = {}
    for tracker in trackers:
        if hasattr(tracker, "summary"):
            name = getattr(tracker, "name", type(tracker).__name__)
            summaries[name] = tracker.summary()
    return RunResult(
        config=config,
        final_x=state.x,
        steps_run=state.step_count,
        grad_evals=state.grad_evals,
        elapsed_seconds=elapsed,
        tracker_summaries=summaries,
    )


def gld_samples(
    obj: FiniteSumObjective,
    step_size: float,
    beta: float,
    steps: int,
    burn_in: int = 0,
    thin: int = 1,
    seed: int = 0,
    x0=None,
    chunk: int = 1 << 15,
) -> np.ndarray:
    """Full-gradient chain returning retained iterates, shape (kept, dim).

    Equivalent to :func:`run` with a :class:`SampleRecorder` but drawing
    the Gaussians in blocks (same stream) and, for 1-d objectives with a
    scalar drift, running the update in scalar arithmetic.  The scalar
    path regroups floating point relative to :func:`run` at the 1-ulp
    level; the retained-sample schedule and the noise stream are
    identical.
    """
    _check_step_params(step_size, beta)
    if steps < 0 or burn_in < 0 or thin < 1:
        raise ValueError("steps/burn_in must be >= 0 and thin >= 1")
    noise = NoiseSource(seed)
    scale = math.sqrt(2.0 * step_size / beta)
    kept_count = max(0, -(-(steps - burn_in) // thin)) if steps > burn_in else 0
    out = np.empty((kept_count, obj.dim))
    write = 0

    drift_fn = obj.scalar_drift_1d()
    if drift_fn is not None and obj.dim == 1:
        x = float(np.zeros(1)[0] if x0 is None else np.asarray(x0, dtype=np.float64).reshape(1)[0])
        k = 0
        while k < steps:
            m = min(chunk, steps - k)
            eps = noise.gaussian_block(m, 1)[:, 0]
            for i in range(m):
                x = x - step_size * drift_fn(x) + scale * eps[i]
                k += 1
                if k > burn_in and (k - burn_in - 1) % thin == 0:
                    out[write, 0] = x
                    write += 1
        return out

    x = np.zeros(obj.dim) if x0 is None else np.array(x0, dtype=np.float64).reshape(obj.dim)
    k = 0
    while k < steps:
        m = min(chunk, steps - k)
        eps = noise.gaussian_block(m, obj.dim)
        for i in range(m):
            x = x - step_size * obj.full_gradient(x) + scale * eps[i]
            k += 1
            if k > burn_in and (k - burn_in - 1) % thin == 0:
                out[write] = x
                write += 1
    return out
