"""Finite-sum benchmark objectives with analytically certified constants.

Two families are provided:

* ``quadratic``: f_i(x) = ||x - a_i||^2 / 2 for per-component anchor points
  a_i.  The mean objective is a shifted quadratic bowl, so its Gibbs measure
  is an exact Gaussian and every downstream quantity has a closed form.
* ``cosine``: f_i(x) = (c/2)||x||^2 + A cos(<w_i, x>) + <t_i, x>.  The
  cosine ripple makes the components (and, for strong enough ripples, the
  mean) nonconvex while global smoothness and dissipativity constants stay
  available in closed form.

Each objective carries a :class:`Certificate` with those constants.  The
certificate is analytic, never estimated: :func:`certify` only cross-checks
the stored constants against sampled inequalities and reports violations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

Vector = np.ndarray

__all__ = [
    "Certificate",
    "CertificateReport",
    "FiniteSumObjective",
    "QuadraticObjective",
    "CosineObjective",
    "make_quadratic",
    "make_cosine",
    "certify",
    "with_gradient_bound",
    "objective_to_json",
    "objective_from_json",
    "objective_to_json_dict",
    "objective_from_json_dict",
]


@dataclass(frozen=True)
class Certificate:
    """Analytic constants attached to an objective.

    ``smoothness`` is a global Lipschitz constant of every component
    gradient.  ``dissipativity_slope``/``dissipativity_offset`` are the
    (m, b) pair of the inward-drift inequality
    ``<grad F(x), x> >= m ||x||^2 - b``.  ``gradient_bound`` is the affine
    intercept G of ``||grad f_i(x)|| <= smoothness * ||x|| + G``.
    """

    smoothness: float
    dissipativity_slope: float
    dissipativity_offset: float
    gradient_bound: float

    def __post_init__(self) -> None:
        if not self.smoothness > 0:
            raise ValueError("smoothness must be positive")
        if not self.dissipativity_slope > 0:
            raise ValueError("dissipativity_slope must be positive")
        # The offset may legitimately be 0 for families centred on the
        # origin (e.g. a single zero anchor); bound evaluators that need a
        # strictly positive offset enforce that themselves.
        if self.dissipativity_offset < 0:
            raise ValueError("dissipativity_offset must be nonnegative")
        if self.gradient_bound < 0:
            raise ValueError("gradient_bound must be nonnegative")

    def mixing_condition(self, beta: float, dim: int) -> float:
        """Condition-like ratio 2M(b*beta + m*beta + d)/m used by the
        ergodicity constants."""
        m = self.dissipativity_slope
        b = self.dissipativity_offset
        return 2.0 * self.smoothness * (b * beta + m * beta + dim) / m

    def to_json_dict(self) -> dict:
        return {
            "smoothness": self.smoothness,
            "dissipativity_slope": self.dissipativity_slope,
            "dissipativity_offset": self.dissipativity_offset,
            "gradient_bound": self.gradient_bound,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Certificate":
        return cls(
            smoothness=float(data["smoothness"]),
            dissipativity_slope=float(data["dissipativity_slope"]),
            dissipativity_offset=float(data["dissipativity_offset"]),
            gradient_bound=float(data["gradient_bound"]),
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


class FiniteSumObjective:
    """Base class for objectives of the form F(x) = (1/n) sum_i f_i(x).

    Instances are immutable after construction; value and gradient calls
    are safe from any number of concurrent callers.
    """

    family: str = "abstract"

    def __init__(self, n: int, dim: int, certificate: Certificate):
        self._n = int(n)
        self._dim = int(dim)
        self._certificate = certificate
        self._all_indices = np.arange(self._n)
        self._all_indices.setflags(write=False)

    @property
    def n(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def certificate(self) -> Certificate:
        return self._certificate

    # -- family-specific kernels -------------------------------------------------
    def _component_values(self, x: Vector) -> np.ndarray:
        raise NotImplementedError

    def component_gradients(self, indices: np.ndarray, x: Vector) -> np.ndarray:
        """Gradients of the selected components at ``x``, stacked as rows."""
        raise NotImplementedError

    def value_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized F over an ``(m, dim)`` array of points."""
        raise NotImplementedError

    def known_minimizer(self) -> Optional[Vector]:
        """Exact global minimizer when one is available in closed form."""
        return None

    def scalar_drift_1d(self):
        """Optional ``float -> float`` full gradient for 1-d objectives.

        Used by the fast trajectory sampler; returns None when no scalar
        specialization exists.
        """
        return None

    # -- shared operations ---------------------------------------------------------
    def _check_point(self, x) -> Vector:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self._dim,):
            raise ValueError(f"expected point of shape ({self._dim},), got {x.shape}")
        return x

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self._n:
            raise IndexError(f"component index {i} out of range [0, {self._n})")
        return i

    def value(self, x) -> float:
        """Arithmetic mean of the component values at ``x``."""
        x = self._check_point(x)
        return float(np.mean(self._component_values(x)))

    def component_value(self, i: int, x) -> float:
        x = self._check_point(x)
        i = self._check_index(i)
        return float(self._component_values(x)[i])

    def component_gradient(self, i: int, x) -> Vector:
        x = self._check_point(x)
        i = self._check_index(i)
        return self.component_gradients(np.array([i]), x)[0]

    def gradient_over(self, indices, x) -> Vector:
        """Mean of the component gradients over an index subset."""
        x = self._check_point(x)
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise ValueError("index subset must be nonempty")
        if indices.min() < 0 or indices.max() >= self._n:
            raise IndexError("component index out of range")
        return self.component_gradients(indices, x).mean(axis=0)

    def full_gradient(self, x) -> Vector:
        """Mean of all n component gradients (same reduction as
        :meth:`gradient_over` over the full index set, so the full-batch
        degeneracy of the stochastic samplers is exact)."""
        return self.gradient_over(self._all_indices, x)


class QuadraticObjective(FiniteSumObjective):
    """f_i(x) = ||x - a_i||^2 / 2; the Gaussian-oracle family."""

    family = "quadratic"

    def __init__(self, anchors: np.ndarray, certificate: Optional[Certificate] = None):
        anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
        if anchors.ndim != 2 or anchors.shape[0] < 1:
            raise ValueError("anchors must be a nonempty (n, dim) array")
        n, dim = anchors.shape
        self._anchors = _readonly(anchors)
        self._anchor_mean = _readonly(anchors.mean(axis=0))
        if certificate is None:
            certificate = self._default_certificate(anchors)
        super().__init__(n, dim, certificate)

    @staticmethod
    def _default_certificate(anchors: np.ndarray) -> Certificate:
        norms = np.linalg.norm(anchors, axis=1)
        # <x - abar, x> >= ||x||^2/2 - ||abar||^2/2, and ||abar||^2 <= max ||a_i||^2.
        # ||grad f_i(x)|| = ||x - a_i|| <= ||x|| + max ||a_i||, tight along -a_i.
        return Certificate(
            smoothness=1.0,
            dissipativity_slope=0.5,
            dissipativity_offset=float(np.max(norms) ** 2),
            gradient_bound=float(np.max(norms)),
        )

    @property
    def anchors(self) -> np.ndarray:
        return self._anchors

    def _component_values(self, x: Vector) -> np.ndarray:
        diffs = x[None, :] - self._anchors
        return 0.5 * np.sum(diffs * diffs, axis=1)

    def component_gradients(self, indices: np.ndarray, x: Vector) -> np.ndarray:
        return x[None, :] - self._anchors[indices]

    def value_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        diffs = points[:, None, :] - self._anchors[None, :, :]
        return 0.5 * np.sum(diffs * diffs, axis=2).mean(axis=1)

    def known_minimizer(self) -> Vector:
        return self._anchor_mean.copy()

    def scalar_drift_1d(self):
        if self._dim != 1:
            return None
        abar = float(self._anchor_mean[0])
        return lambda x: x - abar


class CosineObjective(FiniteSumObjective):
    """f_i(x) = (c/2)||x||^2 + A cos(<w_i, x>) + <t_i, x>.

    Globally smooth and dissipative for any curvature c > 0; individual
    components are nonconvex whenever A * ||w_i||^2 > c.
    """

    family = "cosine"

    def __init__(
        self,
        curvature: float,
        amplitude: float,
        frequencies: np.ndarray,
        tilts: np.ndarray,
        certificate: Optional[Certificate] = None,
    ):
        if not curvature > 0:
            raise ValueError("curvature must be positive")
        if amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        frequencies = np.atleast_2d(np.asarray(frequencies, dtype=np.float64))
        tilts = np.atleast_2d(np.asarray(tilts, dtype=np.float64))
        if frequencies.ndim != 2 or frequencies.shape[0] < 1:
            raise ValueError("frequencies must be a nonempty (n, dim) array")
        if tilts.shape != frequencies.shape:
            raise ValueError(
                f"tilts shape {tilts.shape} does not match frequencies shape {frequencies.shape}"
            )
        n, dim = frequencies.shape
        self._curvature = float(curvature)
        self._amplitude = float(amplitude)
        self._frequencies = _readonly(frequencies)
        self._tilts = _readonly(tilts)
        self._tilt_mean = _readonly(tilts.mean(axis=0))
        if certificate is None:
            certificate = self._default_certificate(curvature, amplitude, frequencies, tilts)
        super().__init__(n, dim, certificate)

    @staticmethod
    def _default_certificate(curvature, amplitude, frequencies, tilts) -> Certificate:
        wmax = float(np.max(np.linalg.norm(frequencies, axis=1)))
        tilt_mean_norm = float(np.linalg.norm(tilts.mean(axis=0)))
        tilt_max_norm = float(np.max(np.linalg.norm(tilts, axis=1)))
        # Component Hessians are c*I - A*cos(.)*w w^T, so the gradient map is
        # (c + A max||w||^2)-Lipschitz. <grad F(x), x> >= c||x||^2 -
        # (A max||w|| + ||tbar||)||x||, and peeling the linear term with
        # Young's inequality gives slope c/2 with the squared offset below.
        return Certificate(
            smoothness=curvature + amplitude * wmax**2,
            dissipativity_slope=curvature / 2.0,
            dissipativity_offset=(amplitude * wmax + tilt_mean_norm) ** 2 / (2.0 * curvature),
            gradient_bound=amplitude * wmax + tilt_max_norm,
        )

    @property
    def curvature(self) -> float:
        return self._curvature

    @property
    def amplitude(self) -> float:
        return self._amplitude

    @property
    def frequencies(self) -> np.ndarray:
        return self._frequencies

    @property
    def tilts(self) -> np.ndarray:
        return self._tilts

    def _component_values(self, x: Vector) -> np.ndarray:
        # Row-wise elementwise products instead of BLAS matvecs: each
        # component's arithmetic is then bitwise independent of which other
        # components are evaluated alongside it.
        phases = (self._frequencies * x[None, :]).sum(axis=1)
        quad = 0.5 * self._curvature * float(x @ x)
        return quad + self._amplitude * np.cos(phases) + (self._tilts * x[None, :]).sum(axis=1)

    def component_gradients(self, indices: np.ndarray, x: Vector) -> np.ndarray:
        w = self._frequencies[indices]
        phases = (w * x[None, :]).sum(axis=1)
        return (
            self._curvature * x[None, :]
            - self._amplitude * np.sin(phases)[:, None] * w
            + self._tilts[indices]
        )

    def value_many(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        phases = points @ self._frequencies.T
        quad = 0.5 * self._curvature * np.sum(points * points, axis=1)
        return quad + self._amplitude * np.cos(phases).mean(axis=1) + (points @ self._tilts.T).mean(axis=1)

    def known_minimizer(self) -> Optional[Vector]:
        if self._amplitude == 0.0:
            return -self._tilt_mean / self._curvature
        return None

    def scalar_drift_1d(self):
        if self._dim != 1 or self._n != 1:
            return None
        import math

        c = self._curvature
        a = self._amplitude
        w = float(self._frequencies[0, 0])
        t = float(self._tilts[0, 0])
        return lambda x: c * x - a * math.sin(w * x) * w + t


def make_quadratic(anchors: Sequence) -> QuadraticObjective:
    """Build the quadratic family around the given (n, dim) anchor points."""
    return QuadraticObjective(np.asarray(anchors, dtype=np.float64))


def make_cosine(curvature: float, amplitude: float, frequencies, tilts) -> CosineObjective:
    """Build the cosine family from curvature c, ripple amplitude A, and per-
    component frequency/tilt vectors."""
    return CosineObjective(curvature, amplitude, np.asarray(frequencies), np.asarray(tilts))


def with_gradient_bound(obj: FiniteSumObjective, gradient_bound: float) -> FiniteSumObjective:
    """Copy of ``obj`` with the certificate's gradient bound replaced.

    Used after the global minimizer has been located to install the
    minimizer-based gradient constant in place of the construction-time
    closed form.
    """
    cert = replace(obj.certificate, gradient_bound=float(gradient_bound))
    return _rebuild(obj, cert)


def _rebuild(obj: FiniteSumObjective, certificate: Certificate) -> FiniteSumObjective:
    if isinstance(obj, QuadraticObjective):
        return QuadraticObjective(obj.anchors, certificate=certificate)
    if isinstance(obj, CosineObjective):
        return CosineObjective(
            obj.curvature, obj.amplitude, obj.frequencies, obj.tilts, certificate=certificate
        )
    raise TypeError(f"unknown objective type {type(obj)!r}")


# -- certification ------------------------------------------------------------------


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of sampling the certified inequalities.

    Margins are signed so that violations are positive excesses /
    negative margins; counts tally sampled points beyond the slack.
    """

    samples: int
    radius: float
    slack: float
    max_smoothness_ratio: float
    smoothness_violations: int
    min_dissipativity_margin: float
    dissipativity_violations: int
    max_gradient_excess: float
    gradient_bound_violations: int

    @property
    def ok(self) -> bool:
        return (
            self.smoothness_violations == 0
            and self.dissipativity_violations == 0
            and self.gradient_bound_violations == 0
        )

    def to_json_dict(self) -> dict:
        return {
            "samples": self.samples,
            "radius": self.radius,
            "slack": self.slack,
            "max_smoothness_ratio": self.max_smoothness_ratio,
            "smoothness_violations": self.smoothness_violations,
            "min_dissipativity_margin": self.min_dissipativity_margin,
            "dissipativity_violations": self.dissipativity_violations,
            "max_gradient_excess": self.max_gradient_excess,
            "gradient_bound_violations": self.gradient_bound_violations,
            "ok": self.ok,
        }


def _uniform_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random(count) ** (1.0 / dim)
    return directions / norms * radii[:, None]


def certify(
    obj: FiniteSumObjective,
    radius: Optional[float] = None,
    samples: int = 2000,
    rng=None,
    slack: float = 1e-9,
) -> CertificateReport:
    """Cross-check the certificate against sampled inequalities.

    Samples points (and point pairs) uniformly from the ball of the given
    radius and evaluates the smoothness ratio, the dissipativity margin,
    and the gradient-bound excess for every component.  The report carries
    the worst observed values and the number of violations beyond the
    slack; it never adjusts the certificate.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    cert = obj.certificate
    if radius is None:
        radius = 10.0 * (1.0 + cert.dissipativity_offset / cert.dissipativity_slope)
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(0 if rng is None else int(rng))

    xs = _uniform_ball(rng, samples, obj.dim, radius)
    ys = _uniform_ball(rng, samples, obj.dim, radius)

    all_idx = np.arange(obj.n)
    max_ratio = 0.0
    ratio_violations = 0
    min_margin = np.inf
    margin_violations = 0
    max_excess = -np.inf
    excess_violations = 0

    for x, y in zip(xs, ys):
        gx = obj.component_gradients(all_idx, x)
        gy = obj.component_gradients(all_idx, y)
        gap = float(np.linalg.norm(x - y))
        if gap > 0.0:
            ratio = float(np.max(np.linalg.norm(gx - gy, axis=1))) / gap
            max_ratio = max(max_ratio, ratio)
            if ratio > cert.smoothness + slack:
                ratio_violations += 1

        full = gx.mean(axis=0)
        margin = float(full @ x) - (
            cert.dissipativity_slope * float(x @ x) - cert.dissipativity_offset
        )
        min_margin = min(min_margin, margin)
        if margin < -slack:
            margin_violations += 1

        allowed = cert.smoothness * float(np.linalg.norm(x)) + cert.gradient_bound
        excess = float(np.max(np.linalg.norm(gx, axis=1))) - allowed
        max_excess = max(max_excess, excess)
        if excess > slack:
            excess_violations += 1

    return CertificateReport(
        samples=samples,
        radius=float(radius),
        slack=slack,
        max_smoothness_ratio=max_ratio,
        smoothness_violations=ratio_violations,
        min_dissipativity_margin=float(min_margin),
        dissipativity_violations=margin_violations,
        max_gradient_excess=float(max_excess),
        gradient_bound_violations=excess_violations,
    )


# -- serialization ------------------------------------------------------------------


def objective_to_json_dict(obj: FiniteSumObjective) -> dict:
    if isinstance(obj, QuadraticObjective):
        parameters = {"anchors": obj.anchors.tolist()}
    elif isinstance(obj, CosineObjective):
        parameters = {
            "curvature": obj.curvature,
            "amplitude": obj.amplitude,
            "frequencies": obj.frequencies.tolist(),
            "tilts": obj.tilts.tolist(),
        }
    else:
        raise TypeError(f"unknown objective type {type(obj)!r}")
    return {
        "family": obj.family,
        "n": obj.n,
        "dim": obj.dim,
        "parameters": parameters,
        "certificate": obj.certificate.to_json_dict(),
    }


def objective_from_json_dict(data: dict) -> FiniteSumObjective:
    family = data.get("family")
    params = data.get("parameters", {})
    certificate = (
        Certificate.from_json_dict(data["certificate"]) if "certificate" in data else None
    )
    if family == "quadratic":
        obj = QuadraticObjective(np.asarray(params["anchors"], dtype=np.float64), certificate)
    elif family == "cosine":
        obj = CosineObjective(
            float(params["curvature"]),
            float(params["amplitude"]),
            np.asarray(params["frequencies"], dtype=np.float64),
            np.asarray(params["tilts"], dtype=np.float64),
            certificate,
        )
    else:
        raise ValueError(f"unknown objective family {family!r}")
    declared = (data.get("n"), data.get("dim"))
    if declared != (None, None) and declared != (obj.n, obj.dim):
        raise ValueError(
            f"declared shape (n={declared[0]}, dim={declared[1]}) does not match "
            f"parameters (n={obj.n}, dim={obj.dim})"
        )
    return obj


def objective_to_json(obj: FiniteSumObjective) -> str:
    return json.dumps(objective_to_json_dict(obj), indent=2)


def objective_from_json(text: str) -> FiniteSumObjective:
    return objective_from_json_dict(json.loads(text))
