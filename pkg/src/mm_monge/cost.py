"""Quadratic multi-marginal transport costs and the barycenter map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_rng import SizeError, as_matrix

__all__ = ["CostSpec", "cost_batch", "cost_grad", "barycenter_samples"]

COST_KINDS = ("chain_quadratic", "pairwise_quadratic")


@dataclass(frozen=True)
class CostSpec:
    """``chain_quadratic``: sum_i |p_i - p_{i+1}|^2.
    ``pairwise_quadratic``: sum_{i<j} |p_i - p_j|^2.
    """

    kind: str = "chain_quadratic"
    n_marginals: int = 3

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost {self.kind!r}")
        if self.n_marginals < 2:
            raise ValueError("need at least 2 marginals")

    def pairs(self):
        n = self.n_marginals
        if self.kind == "chain_quadratic":
            return [(i, i + 1) for i in range(n - 1)]
        return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _check(spec: CostSpec, points):
    pts = [as_matrix(p, f"points[{i}]") for i, p in enumerate(points)]
    if len(pts) != spec.n_marginals:
        raise SizeError(f"expected {spec.n_marginals} point sets, got {len(pts)}")
    shape = pts[0].shape
    for p in pts[1:]:
        if p.shape != shape:
            raise SizeError(f"shape mismatch: {p.shape} vs {shape}")
    return pts


def cost_batch(spec: CostSpec, points) -> np.ndarray:
    """Per-row cost; ``points[0]`` is the source batch."""
    pts = _check(spec, points)
    out = np.zeros(pts[0].shape[0])
    for i, j in spec.pairs():
        diff = pts[i] - pts[j]
        out += np.sum(diff * diff, axis=1)
    return out


def cost_grad(spec: CostSpec, points) -> list[np.ndarray]:
    """Gradient of ``cost_batch(spec, points).sum()`` for every point set."""
    pts = _check(spec, points)
    grads = [np.zeros_like(p) for p in pts]
    for i, j in spec.pairs():
        diff = 2.0 * (pts[i] - pts[j])
        grads[i] += diff
        grads[j] -= diff
    return grads


def barycenter_samples(points) -> np.ndarray:
    pts = [as_matrix(p) for p in points]
    if not pts:
        raise SizeError("need at least one point set")
    for p in pts[1:]:
        if p.shape != pts[0].shape:
            raise SizeError(f"shape mismatch: {p.shape} vs {pts[0].shape}")
    return np.mean(np.stack(pts), axis=0)
