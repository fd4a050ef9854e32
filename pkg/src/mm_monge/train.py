"""Penalised multi-marginal objective and the minibatch training loop.

The objective for maps ``T_2..T_N`` on a source batch ``X_1`` is

    mean_i c(X_1i, T_2(X_1i), ..., T_N(X_1i)) + sum_h lam_h * MMD_u^2(T_h(X_1), X_h)

(``loss_form="standard"``).  ``loss_form="paper_normalized"`` divides the
whole thing by prod(lam) and drops the target-target Gram block, which is
constant in the parameters.  Both forms have the same minimisers.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cost import CostSpec, barycenter_samples, cost_batch, cost_grad
from .data import MarginalSpec, generate
from .kernel import KernelConfig, gram
from .mmd import mmd2_biased, mmd2_unbiased_terms
from .net import MapEnsemble, MlpSpec, backward, forward
from .optim import make_optimizer, step
from .tensor_rng import Rng, SizeError, as_matrix

__all__ = [
    "TrainConfig",
    "TrainReport",
    "TrainingAborted",
    "gauss_shift_config",
    "moons_circles_config",
    "loss_and_grads",
    "fit",
    "evaluate",
    "build_datasets",
    "thread_count",
]

LOSS_FORMS = ("standard", "paper_normalized")
THREADS_ENV = "MM_MONGE_THREADS"


def thread_count() -> int:
    """Worker cap from ``MM_MONGE_THREADS``; 0 means serial."""
    try:
        return max(int(os.environ.get(THREADS_ENV, "0") or 0), 0)
    except ValueError:
        return 0


@dataclass
class TrainConfig:
    marginals: list
    epochs: int = 2000
    batch_size: int = 500
    lambdas: tuple = (100.0, 100.0)
    cost: str = "chain_quadratic"
    alpha: float = 1.0
    optimizer: str = "adam"
    lr: float = 1e-4
    loss_form: str = "standard"
    hidden: tuple = (128, 128)
    activation: str = "relu"
    seed: int = 0
    eval_seed: int | None = None
    eval_n: int = 500
    threads: int = 0

    def __post_init__(self):
        self.marginals = [
            m if isinstance(m, MarginalSpec) else MarginalSpec.from_dict(m)
            for m in self.marginals
        ]
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.hidden = tuple(int(h) for h in self.hidden)
        if len(self.marginals) < 2:
            raise ValueError("need a source and at least one target marginal")
        if len(self.lambdas) == 1 and self.n_marginals > 2:
            self.lambdas = self.lambdas * (self.n_marginals - 1)
        if len(self.lambdas) != self.n_marginals - 1:
            raise ValueError(f"need {self.n_marginals - 1} penalty weights, got {len(self.lambdas)}")
        if any(not lam > 0 for lam in self.lambdas):
            raise ValueError("penalty weights must be > 0")
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.loss_form not in LOSS_FORMS:
            raise ValueError(f"unknown loss form {self.loss_form!r}")
        # validates kind names early
        self.cost_spec
        self.kernel

    @property
    def n_marginals(self) -> int:
        return len(self.marginals)

    @property
    def kernel(self) -> KernelConfig:
        return KernelConfig("gaussian", self.alpha)

    @property
    def cost_spec(self) -> CostSpec:
        return CostSpec(self.cost, self.n_marginals)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["marginals"] = [m.to_dict() for m in self.marginals]
        d["lambdas"] = list(self.lambdas)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def gauss_shift_config(**overrides) -> TrainConfig:
    """N(0, I) source, targets N((3,3), I) and N((10,10), I), 500 samples each."""
    marg = [
        MarginalSpec("isotropic_gaussian", mean=0.0, sd=1.0),
        MarginalSpec("isotropic_gaussian", mean=3.0, sd=1.0),
        MarginalSpec("isotropic_gaussian", mean=10.0, sd=1.0),
    ]
    return TrainConfig(**{"marginals": marg, "epochs": 2000, **overrides})


def moons_circles_config(**overrides) -> TrainConfig:
    marg = [
        MarginalSpec("isotropic_gaussian", mean=0.0, sd=1.0),
        MarginalSpec("two_moons", noise=0.05),
        MarginalSpec("two_circles", noise=0.05, factor=0.5),
    ]
    return TrainConfig(**{"marginals": marg, "epochs": 5000, **overrides})


@dataclass
class TrainReport:
    config: dict
    loss: list = field(default_factory=list)
    marginals: list = field(default_factory=list)
    wallclock_s: float = 0.0
    optimizer_hyper: dict = field(default_factory=dict)
    mean_cost: float | None = None
    barycenter_mean: float | None = None
    aborted_epoch: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


class TrainingAborted(RuntimeError):
    """Numeric failure mid-training; carries the partial report."""

    def __init__(self, epoch: int, report: TrainReport, cause: Exception):
        super().__init__(f"training aborted at epoch {epoch}: {cause}")
        self.epoch = epoch
        self.report = report


def _map_terms(spec, params, x1, target, kcfg, with_yy):
    y, tape = forward(spec, params, x1)
    kxx, kxy, kyy, g_mmd = mmd2_unbiased_terms(kcfg, y, target, with_yy=with_yy)
    return y, tape, kxx, kxy, kyy, g_mmd


class TargetGram:
    """Gram matrix of a fixed target dataset, computed once.

    For a bootstrap batch ``data[idx]`` the off-diagonal Gram mean equals
    ``(c' G c - sum_k c_k G_kk) / (M (M - 1))`` with ``c`` the index counts.
    """

    def __init__(self, kcfg: KernelConfig, data: np.ndarray):
        self.G = gram(kcfg, data, data)
        self.diag = np.diag(self.G).copy()

    def offdiag_mean(self, idx: np.ndarray) -> float:
        m = idx.size
        c = np.bincount(idx, minlength=self.G.shape[0]).astype(np.float64)
        return float((c @ self.G @ c - c @ self.diag) / (m * (m - 1)))


def loss_and_grads(ensemble: MapEnsemble, batches, cfg: TrainConfig, pool=None, kyy=None):
    """Objective value, its decomposition, and the gradient in ``ensemble.flat``.

    ``kyy`` optionally supplies the target-target U-statistic block per
    target (it does not depend on the parameters); otherwise it is computed
    from the batches when the standard loss form needs it.
    """
    batches = [as_matrix(b, f"batches[{i}]") for i, b in enumerate(batches)]
    n = cfg.n_marginals
    if len(batches) != n or len(ensemble) != n - 1:
        raise SizeError(f"expected {n} batches and {n - 1} maps")
    shape = batches[0].shape
    if any(b.shape != shape for b in batches) or shape[1] != ensemble.dim:
        raise SizeError("all batches must be M x d with d the map dimension")
    m = shape[0]
    x1 = batches[0]
    kcfg = cfg.kernel
    standard = cfg.loss_form == "standard"
    need_yy = standard and kyy is None
    jobs = [
        (s, p, x1, batches[h + 1], kcfg, need_yy)
        for h, (s, p) in enumerate(zip(ensemble.specs, ensemble.params))
    ]
    if pool is not None:
        res = list(pool.map(lambda a: _map_terms(*a), jobs))
    else:
        res = [_map_terms(*a) for a in jobs]

    points = [x1] + [r[0] for r in res]
    cspec = cfg.cost_spec
    cost_term = float(cost_batch(cspec, points).mean())
    cgrads = cost_grad(cspec, points)

    scale = 1.0 if standard else 1.0 / math.prod(cfg.lambdas)
    penalties = []
    loss = cost_term
    grad = np.empty_like(ensemble.flat)
    for h, (lam, r) in enumerate(zip(cfg.lambdas, res)):
        _, tape, kxx, kxy, kyy_h, g_mmd = r
        if kyy is not None:
            kyy_h = kyy[h]
        term = kxx - 2.0 * kxy + (kyy_h if standard else 0.0)
        penalties.append(lam * term * scale)
        loss += lam * term
        upstream = (cgrads[h + 1] / m + lam * g_mmd) * scale
        g, _ = backward(ensemble.specs[h], ensemble.params[h], tape, upstream)
        grad[ensemble.offsets[h]:ensemble.offsets[h + 1]] = g
    loss *= scale
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    decomposition = {"cost_term": cost_term * scale, "penalties": penalties}
    return loss, decomposition, grad


def build_datasets(cfg: TrainConfig, rng: Rng) -> list[np.ndarray]:
    return [generate(spec, r) for spec, r in zip(cfg.marginals, rng.spawn(cfg.n_marginals))]


def _make_ensemble(cfg: TrainConfig, rng: Rng, d: int) -> MapEnsemble:
    specs = [MlpSpec(d, cfg.hidden, d, cfg.activation) for _ in range(cfg.n_marginals - 1)]
    return MapEnsemble.initialize(specs, rng)


def fit(cfg: TrainConfig, datasets=None, progress=None):
    """Run the training loop; returns ``(ensemble, report)``.

    Every epoch draws a fresh minibatch (with replacement) of size
    ``batch_size`` from each of the fixed datasets, source included.
    """
    master = Rng(cfg.seed)
    data_rng, init_rng, batch_rng = master.spawn(3)
    if datasets is None:
        datasets = build_datasets(cfg, data_rng)
    d = datasets[0].shape[1]
    if any(x.shape[1] != d for x in datasets):
        raise SizeError("all marginals must share one dimension")
    ensemble = _make_ensemble(cfg, init_rng, d)
    opt = make_optimizer(cfg.optimizer, cfg.lr, ensemble.flat.size)
    report = TrainReport(config=cfg.to_dict(), optimizer_hyper=dict(opt.hyper))

    threads = cfg.threads or thread_count()
    pool = ThreadPoolExecutor(min(threads, len(ensemble))) if threads > 1 else None
    t0 = time.perf_counter()
    target_grams = []
    if cfg.loss_form == "standard" and cfg.epochs > 0:
        target_grams = [TargetGram(cfg.kernel, x) for x in datasets[1:]]
    try:
        for epoch in range(cfg.epochs):
            idx = [batch_rng.integers(x.shape[0], cfg.batch_size) for x in datasets]
            batches = [x[i] for x, i in zip(datasets, idx)]
            kyy = [tg.offdiag_mean(i) for tg, i in zip(target_grams, idx[1:])] or None
            try:
                loss, _, grad = loss_and_grads(ensemble, batches, cfg, pool, kyy=kyy)
                step(opt, ensemble.flat, grad)
            except FloatingPointError as exc:
                report.aborted_epoch = epoch
                report.wallclock_s = time.perf_counter() - t0
                raise TrainingAborted(epoch, report, exc) from exc
            ensemble.touch()
            report.loss.append(loss)
            if progress is not None:
                progress(epoch, loss)
    finally:
        if pool is not None:
            pool.shutdown()
    report.wallclock_s = time.perf_counter() - t0
    stats = evaluate(ensemble, cfg, cfg.eval_seed if cfg.eval_seed is not None else cfg.seed + 10_000,
                     datasets=datasets)
    report.marginals = stats["marginals"]
    report.mean_cost = stats["mean_cost"]
    report.barycenter_mean = stats["barycenter_mean"]
    return ensemble, report


def _fresh(spec: MarginalSpec, data: np.ndarray | None, n: int, rng: Rng) -> np.ndarray:
    if spec.kind == "csv_file":
        if data is None:
            data = generate(spec, rng)
        return data[rng.integers(data.shape[0], n)]
    return generate(MarginalSpec(**{**asdict(spec), "n": n}), rng)


def evaluate(ensemble: MapEnsemble, cfg: TrainConfig, eval_seed: int, datasets=None) -> dict:
    """Push a fresh source batch through every map and summarise.

    Per target marginal: pooled mean and SD over all coordinates of the
    pushed samples, the same for a fresh target batch, and the biased MMD^2
    between the two.  ``unstable`` marks |mean - target mean| > 1 or SD > 2.
    """
    rng = Rng(eval_seed)
    rngs = rng.spawn(cfg.n_marginals)
    n = cfg.eval_n
    fresh = [
        _fresh(spec, None if datasets is None else datasets[i], n, r)
        for i, (spec, r) in enumerate(zip(cfg.marginals, rngs))
    ]
    x = fresh[0]
    pushed = ensemble.push(x)
    out = []
    for h, (p, target) in enumerate(zip(pushed, fresh[1:]), start=2):
        mean, sd = float(p.mean()), float(p.std())
        t_mean, t_sd = float(target.mean()), float(target.std())
        out.append({
            "index": h,
            "mean": mean,
            "sd": sd,
            "mmd2": mmd2_biased(cfg.kernel, p, target).value,
            "target_mean": t_mean,
            "target_sd": t_sd,
            "unstable": bool(abs(mean - t_mean) > 1.0 or sd > 2.0),
        })
    points = [x] + pushed
    return {
        "marginals": out,
        "mean_cost": float(cost_batch(cfg.cost_spec, points).mean()),
        "barycenter_mean": float(barycenter_samples(points).mean()),
        "source": x,
        "pushed": pushed,
        "targets": fresh[1:],
    }
