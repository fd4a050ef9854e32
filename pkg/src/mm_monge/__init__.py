"""Multi-marginal Monge maps learned with an MMD penalty."""

from .cost import CostSpec, barycenter_samples, cost_batch, cost_grad
from .data import MarginalSpec, generate, load_csv, save_csv
from .kernel import KernelConfig, eval_kernel, gram, gram_grad_wrt_a
from .mmd import mmd2_biased, mmd2_gaussian_oracle, mmd2_grad_wrt_x, mmd2_unbiased
from .net import MapEnsemble, MlpParams, MlpSpec, backward, forward, init
from .optim import OptimizerState, make_optimizer, step
from .tensor_rng import Rng, SizeError, pairwise_sq_dists, standard_normal_matrix
from .train import (
    TrainConfig,
    TrainReport,
    evaluate,
    fit,
    gauss_shift_config,
    loss_and_grads,
    moons_circles_config,
)

__version__ = "0.1.0"
