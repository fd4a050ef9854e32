"""Gaussian reproducing kernel, Gram matrices and their gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_rng import SizeError, as_matrix, pairwise_sq_dists

__all__ = ["KernelConfig", "eval_kernel", "gram", "gram_grad_wrt_a"]

FAMILIES = ("gaussian",)


@dataclass(frozen=True)
class KernelConfig:
    """``K(x, y) = exp(-alpha * |x - y|^2)``."""

    family: str = "gaussian"
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


def eval_kernel(cfg: KernelConfig, x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise SizeError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-cfg.alpha * np.dot(d, d)))


def gram(cfg: KernelConfig, a, b) -> np.ndarray:
    return np.exp(-cfg.alpha * pairwise_sq_dists(a, b))


def gram_grad_wrt_a(cfg: KernelConfig, a, b, upstream, G=None) -> np.ndarray:
    """Gradient of ``sum(upstream * gram(a, b))`` with respect to ``a``.

    ``G`` may be passed to reuse an already computed Gram matrix.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (a.shape[0], b.shape[0]):
        raise SizeError(
            f"upstream shape {upstream.shape} != gram shape {(a.shape[0], b.shape[0])}"
        )
    if G is None:
        G = gram(cfg, a, b)
    W = upstream * G
    # d/da_i K(a_i, b_j) = -2 alpha (a_i - b_j) K(a_i, b_j)
    return -2.0 * cfg.alpha * (W.sum(axis=1)[:, None] * a - W @ b)
