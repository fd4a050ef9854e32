"""First-order updaters acting on flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor_rng import SizeError

__all__ = ["OptimizerState", "make_optimizer", "step", "KINDS", "DEFAULT_HYPER"]

KINDS = ("adam", "adagrad", "sgd", "rmsprop")

DEFAULT_HYPER = {
    "sgd": {},
    "adagrad": {"eps": 1e-10},
    "rmsprop": {"rho": 0.99, "eps": 1e-8},
    "adam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
}


@dataclass
class OptimizerState:
    kind: str
    lr: float
    n: int
    hyper: dict = field(default_factory=dict)
    step_count: int = 0
    m: np.ndarray | None = None  # adam first moment
    v: np.ndarray | None = None  # adam second moment / rmsprop average / adagrad sum

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        self.hyper = {**DEFAULT_HYPER[self.kind], **self.hyper}
        if self.kind == "adam":
            self.m = np.zeros(self.n)
        if self.kind != "sgd":
            self.v = np.zeros(self.n)


def make_optimizer(kind: str, lr: float, n: int, **hyper) -> OptimizerState:
    return OptimizerState(kind, lr, n, hyper)


def step(state: OptimizerState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Apply one update to ``params`` in place and return it.

    A non-finite gradient raises ``FloatingPointError`` before anything is
    modified.
    """
    if params.shape != (state.n,) or grads.shape != (state.n,):
        raise SizeError(
            f"expected vectors of length {state.n}, got {params.shape} and {grads.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise FloatingPointError("non-finite gradient")
    h = state.hyper
    lr = state.lr
    state.step_count += 1
    t = state.step_count
    if state.kind == "sgd":
        params -= lr * grads
    elif state.kind == "adagrad":
        state.v += grads * grads
        params -= lr * grads / (np.sqrt(state.v) + h["eps"])
    elif state.kind == "rmsprop":
        state.v *= h["rho"]
        state.v += (1.0 - h["rho"]) * grads * grads
        params -= lr * grads / (np.sqrt(state.v) + h["eps"])
    else:
        b1, b2 = h["beta1"], h["beta2"]
        state.m *= b1
        state.m += (1.0 - b1) * grads
        state.v *= b2
        state.v += (1.0 - b2) * grads * grads
        m_hat = state.m / (1.0 - b1 ** t)
        v_hat = state.v / (1.0 - b2 ** t)
        params -= lr * m_hat / (np.sqrt(v_hat) + h["eps"])
    return params
