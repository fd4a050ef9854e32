import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_diff, rel_err
from mm_monge.kernel import KernelConfig, eval_kernel, gram, gram_grad_wrt_a
from mm_monge.tensor_rng import SizeError

K1 = KernelConfig(alpha=1.0)


def test_self_is_one():
    assert eval_kernel(K1, [0.3, -1.0], [0.3, -1.0]) == 1.0


def test_unit_distance():
    assert eval_kernel(K1, [0, 0], [1, 0]) == pytest.approx(0.3678794, abs=1e-7)


def test_distance_thirteen():
    assert eval_kernel(K1, [1, 2], [3, -1]) == pytest.approx(math.exp(-13), rel=1e-14)


def test_eval_dim_mismatch():
    with pytest.raises(SizeError):
        eval_kernel(K1, [1, 2], [1, 2, 3])


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_alpha_positive(alpha):
    with pytest.raises(ValueError):
        KernelConfig(alpha=alpha)


def test_unknown_family():
    with pytest.raises(ValueError):
        KernelConfig(family="matern")


class TestGram:
    def test_two_point(self):
        G = gram(K1, [[0, 0], [1, 0]], [[0, 0], [1, 0]])
        np.testing.assert_allclose(G, [[1, math.exp(-1)], [math.exp(-1), 1]], rtol=1e-15)

    def test_matches_eval(self, nprng):
        a = nprng.normal(size=(4, 2))
        b = nprng.normal(size=(3, 2))
        G = gram(KernelConfig(alpha=0.7), a, b)
        for i in range(4):
            for j in range(3):
                assert G[i, j] == pytest.approx(eval_kernel(KernelConfig(alpha=0.7), a[i], b[j]), rel=1e-14)

    def test_diag_symmetric_bounded(self, nprng):
        a = nprng.normal(size=(10, 2))
        G = gram(K1, a, a)
        assert np.all(np.diag(G) == 1.0)
        assert np.array_equal(G, G.T)
        assert np.all((G > 0) & (G <= 1))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 20), st.integers(0, 2**32 - 1))
    def test_positive_definite(self, n, seed):
        a = np.random.default_rng(seed).normal(scale=2.0, size=(n, 2))
        assert np.linalg.eigvalsh(gram(K1, a, a)).min() >= -1e-10

    def test_shape_mismatch(self):
        with pytest.raises(SizeError):
            gram(K1, np.zeros((2, 2)), np.zeros((2, 1)))


class TestGramGrad:
    def test_zero_upstream(self, nprng):
        a = nprng.normal(size=(3, 2))
        assert np.all(gram_grad_wrt_a(K1, a, a, np.zeros((3, 3))) == 0)

    def test_identical_single_row(self):
        a = np.array([[0.4, -0.2]])
        assert np.all(gram_grad_wrt_a(K1, a, a, np.ones((1, 1))) == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 2))
        b = rng.normal(size=(4, 2))
        U = rng.normal(size=(3, 4))
        cfg = KernelConfig(alpha=0.8)
        fd = central_diff(lambda z: float(np.sum(U * gram(cfg, z, b))), a)
        assert rel_err(gram_grad_wrt_a(cfg, a, b, U), fd) < 1e-6

    def test_upstream_shape(self):
        with pytest.raises(SizeError):
            gram_grad_wrt_a(K1, np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((3, 2)))
