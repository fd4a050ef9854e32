"""Squared maximum mean discrepancy estimators.

Two estimators are provided.  The U-statistic drops the diagonal of the
within-sample Gram blocks and is unbiased for the population quantity; it
can be negative.  The V-statistic is the squared RKHS distance between the
two empirical mean embeddings and is always nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import KernelConfig, gram, gram_grad_wrt_a
from .tensor_rng import SizeError, as_matrix

__all__ = [
    "MmdValue",
    "mmd2_unbiased",
    "mmd2_biased",
    "mmd2_grad_wrt_x",
    "mmd2_gaussian_oracle",
    "offdiag_mean",
    "mmd2_unbiased_terms",
]

ESTIMATORS = ("unbiased_u", "biased_v")


@dataclass(frozen=True)
class MmdValue:
    value: float
    estimator: str

    def __float__(self):
        return self.value


def offdiag_mean(G: np.ndarray) -> float:
    """Mean of a square matrix excluding its diagonal."""
    m = G.shape[0]
    return float((G.sum() - np.trace(G)) / (m * (m - 1)))


def _check_pair(x, y, unbiased: bool):
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise SizeError(f"column mismatch: {x.shape[1]} vs {y.shape[1]}")
    if unbiased:
        if x.shape[0] != y.shape[0]:
            raise SizeError(
                f"unbiased estimator needs equal sample counts, got {x.shape[0]} and {y.shape[0]}"
            )
        if x.shape[0] < 2:
            raise SizeError("unbiased estimator needs at least 2 samples")
    elif x.shape[0] < 1 or y.shape[0] < 1:
        raise SizeError("empty sample")
    return x, y


def _exact_sum(G: np.ndarray) -> float:
    # correctly rounded, so the result does not depend on summation order
    return math.fsum(G.ravel())


def mmd2_unbiased(cfg: KernelConfig, x, y) -> MmdValue:
    x, y = _check_pair(x, y, unbiased=True)
    m = x.shape[0]
    pairs = m * (m - 1)
    kxx = (_exact_sum(gram(cfg, x, x)) - m) / pairs  # Gaussian diagonal is exactly 1
    kyy = (_exact_sum(gram(cfg, y, y)) - m) / pairs
    kxy = _exact_sum(gram(cfg, x, y)) / (m * m)
    return MmdValue((kxx + kyy) - 2.0 * kxy, "unbiased_u")


def mmd2_biased(cfg: KernelConfig, x, y) -> MmdValue:
    x, y = _check_pair(x, y, unbiased=False)
    m, n = x.shape[0], y.shape[0]
    kxx = _exact_sum(gram(cfg, x, x)) / (m * m)
    kyy = _exact_sum(gram(cfg, y, y)) / (n * n)
    kxy = _exact_sum(gram(cfg, x, y)) / (m * n)
    # clip round-off below zero; the exact value is a squared norm
    return MmdValue(max((kxx + kyy) - 2.0 * kxy, 0.0), "biased_v")


def mmd2_grad_wrt_x(cfg: KernelConfig, x, y, estimator: str = "unbiased_u") -> np.ndarray:
    """Exact gradient of the chosen estimator with respect to ``x``.

    ``y`` is held fixed, so the YY block contributes nothing.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    unbiased = estimator == "unbiased_u"
    x, y = _check_pair(x, y, unbiased=unbiased)
    m, n = x.shape[0], y.shape[0]
    if unbiased:
        wxx = np.full((m, m), 1.0 / (m * (m - 1)))
        np.fill_diagonal(wxx, 0.0)
    else:
        wxx = np.full((m, m), 1.0 / (m * m))
    # the XX block depends on x through both arguments; weights are symmetric
    g = 2.0 * gram_grad_wrt_a(cfg, x, x, wxx)
    g -= gram_grad_wrt_a(cfg, x, y, np.full((m, n), 2.0 / (m * n)))
    return g


def mmd2_gaussian_oracle(cfg: KernelConfig, d: int, mean_a, var_a: float, mean_b, var_b: float) -> float:
    """Population squared MMD between N(mean_a, var_a I) and N(mean_b, var_b I).

    Uses E exp(-alpha |U - V|^2) for independent Gaussians, where
    U - V ~ N(mu, s I):  (1 + 2 alpha s)^(-d/2) exp(-alpha |mu|^2 / (1 + 2 alpha s)).
    """
    if var_a < 0 or var_b < 0:
        raise ValueError("variances must be >= 0")
    a = cfg.alpha
    mean_a = np.broadcast_to(np.asarray(mean_a, dtype=np.float64), (d,))
    mean_b = np.broadcast_to(np.asarray(mean_b, dtype=np.float64), (d,))
    r = float(np.sum((mean_a - mean_b) ** 2))

    def h(s, r2):
        c = 1.0 + 2.0 * a * s
        return c ** (-d / 2.0) * np.exp(-a * r2 / c)

    return float(h(2 * var_a, 0.0) - 2.0 * h(var_a + var_b, r) + h(2 * var_b, 0.0))


def mmd2_unbiased_terms(cfg: KernelConfig, x, y, with_yy: bool = True):
    """U-statistic pieces and the gradient in one pass over the Gram blocks.

    Returns ``(kxx, kxy, kyy, grad_x)`` where the estimate is
    ``kxx - 2 kxy + kyy`` and ``grad_x`` is its gradient in ``x``.  ``kyy``
    is ``nan`` when ``with_yy`` is false.
    """
    x, y = _check_pair(x, y, unbiased=True)
    m = x.shape[0]
    gxx = gram(cfg, x, x)
    gxy = gram(cfg, x, y)
    kxx = offdiag_mean(gxx)
    kxy = float(gxy.sum()) / (m * m)
    kyy = offdiag_mean(gram(cfg, y, y)) if with_yy else float("nan")
    # diagonal terms have a_i - a_i = 0, so they drop out without masking
    cxx = 2.0 / (m * (m - 1))
    cxy = -2.0 / (m * m)
    g = cxx * (gxx.sum(axis=1)[:, None] * x - gxx @ x)
    g += cxy * (gxy.sum(axis=1)[:, None] * x - gxy @ y)
    return kxx, kxy, kyy, -2.0 * cfg.alpha * g
