"""Pinned benchmark instances used by the test suite, docs, and CLI demos.

The quadratic instances have exactly Gaussian Gibbs measures; the cosine
instances are certified nonconvex (ripple strength beats the curvature
along at least one direction).  All parameters are fixed literals so every
downstream number is reproducible.
"""

from __future__ import annotations

import numpy as np

from .objectives import CosineObjective, QuadraticObjective, make_cosine, make_quadratic

__all__ = ["quad1d", "quad2d", "cos1d", "cos2d", "random_instance"]


def quad1d() -> QuadraticObjective:
    """Four 1-d anchors symmetric about the origin; mean objective is
    (x^2)/2 + 5/4."""
    return make_quadratic([[-2.0], [-1.0], [1.0], [2.0]])


def quad2d() -> QuadraticObjective:
    """Four 2-d anchors at the corners of a square; mean objective is a
    unit bowl centred on the origin."""
    return make_quadratic([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def cos1d() -> CosineObjective:
    """Single-component 1-d double well: x^2/2 + cos(2x)/2.

    Ripple strength A w^2 = 2 beats the curvature 1, so the origin is a
    local maximum between two symmetric global minima near +-0.948.
    """
    return make_cosine(1.0, 0.5, [[2.0]], [[0.0]])


def cos2d() -> CosineObjective:
    """Sixteen-component 2-d cosine instance, nonconvex at the origin.

    Frequency vectors have norm 2 and cluster within +-15 degrees of the
    first axis, so the ripple Hessian at the origin concentrates along
    that axis and beats the unit curvature there (A w^2 = 1.2 > 1).  Tilts
    are sixteenth roots of unity scaled to 0.05, so their mean is exactly
    zero and the components stay heterogeneous.
    """
    n = 16
    spread = np.pi / 12.0
    angles = -spread / 2.0 + spread * np.arange(n) / (n - 1)
    frequencies = 2.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    phis = 2.0 * np.pi * np.arange(n) / n
    tilts = 0.05 * np.stack([np.cos(phis), np.sin(phis)], axis=1)
    return make_cosine(1.0, 0.3, frequencies, tilts)


def random_instance(family: str, n: int, dim: int, seed: int = 0):
    """Seeded random instance of a family, for probes and quick checks."""
    rng = np.random.default_rng(seed)
    if family == "quadratic":
        return make_quadratic(rng.normal(scale=1.5, size=(n, dim)))
    if family == "cosine":
        directions = rng.normal(size=(n, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        frequencies = 2.0 * directions
        tilts = 0.2 * rng.normal(size=(n, dim))
        return make_cosine(1.0, 0.5, frequencies, tilts)
    raise ValueError(f"unknown family {family!r}")
