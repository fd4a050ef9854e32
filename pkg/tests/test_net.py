import numpy as np
import pytest

from conftest import central_diff, rel_err
from mm_monge.net import (
    MapEnsemble,
    MlpParams,
    MlpSpec,
    TapeError,
    backward,
    forward,
    init,
    load_checkpoint,
    save_checkpoint,
)
from mm_monge.tensor_rng import Rng, SizeError


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(2, ())
    with pytest.raises(ValueError):
        MlpSpec(2, (4, 0))
    with pytest.raises(ValueError):
        MlpSpec(2, (4,), out_dim=3)
    with pytest.raises(ValueError):
        MlpSpec(2, (4,), activation="gelu")


def test_param_count():
    assert MlpSpec(2, (128, 128)).n_params == 2 * 128 + 128 + 128 * 128 + 128 + 128 * 2 + 2


class TestInit:
    def test_zero_biases(self):
        p = init(MlpSpec(2, (16, 16)), Rng(1))
        assert all(np.all(b == 0) for _, b in p.layers)

    def test_same_seed_same_params(self):
        s = MlpSpec(2, (16, 16))
        assert init(s, Rng(3)).flat.tobytes() == init(s, Rng(3)).flat.tobytes()

    def test_glorot_bound(self):
        p = init(MlpSpec(2, (128, 128)), Rng(4))
        for W, _ in p.layers:
            fan_out, fan_in = W.shape
            bound = np.sqrt(6 / (fan_in + fan_out))
            assert np.abs(W).max() <= bound
            assert np.abs(W).max() > 0.9 * bound  # actually uses the range


class TestForward:
    def test_zero_params_zero_output(self):
        s = MlpSpec(2, (5, 5))
        y, _ = forward(s, MlpParams(s), np.random.default_rng(0).normal(size=(4, 2)))
        assert np.all(y == 0)

    def test_hand_trace(self):
        s = MlpSpec(2, (2,), activation="relu")
        p = MlpParams(s)
        p.layers[0][0][...] = np.eye(2)
        p.layers[1][0][...] = np.eye(2)
        y, _ = forward(s, p, [[1.0, -1.0]])
        assert y.tolist() == [[1.0, 0.0]]

    def test_rows_independent(self):
        s = MlpSpec(2, (8, 8), activation="tanh")
        p = init(s, Rng(2))
        x = np.random.default_rng(1).normal(size=(3, 2))
        batch, _ = forward(s, p, x)
        rows = np.vstack([forward(s, p, x[i:i + 1])[0] for i in range(3)])
        np.testing.assert_allclose(batch, rows, rtol=1e-14)

    def test_pure(self):
        s = MlpSpec(2, (8, 8))
        p = init(s, Rng(2))
        x = np.random.default_rng(1).normal(size=(5, 2))
        assert forward(s, p, x)[0].tobytes() == forward(s, p, x)[0].tobytes()

    def test_dimension_mismatch(self):
        s = MlpSpec(2, (4,))
        with pytest.raises(SizeError):
            forward(s, MlpParams(s), np.zeros((3, 3)))


def _kink_free_params(spec, seed, x, margin=1e-3):
    """Resample until no hidden pre-activation is within ``margin`` of 0."""
    for k in range(1000):
        p = init(spec, Rng(seed * 1000 + k))
        p.flat += 0.1 * Rng(seed * 7 + k).standard_normal(p.flat.size)  # nonzero biases too
        _, tape = forward(spec, p, x)
        if all(np.abs(z).min() > margin for z in tape.pre):
            return p
    raise RuntimeError("no kink-free parameters found")


class TestBackward:
    def test_zero_upstream(self):
        s = MlpSpec(2, (4, 4))
        p = init(s, Rng(0))
        x = np.ones((3, 2))
        _, tape = forward(s, p, x)
        g, gx = backward(s, p, tape, np.zeros((3, 2)))
        assert np.all(g == 0) and np.all(gx == 0)

    @pytest.mark.parametrize("activation", ["relu", "tanh"])
    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, activation, seed):
        s = MlpSpec(2, (8, 8), activation=activation)
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 2))
        U = rng.normal(size=(4, 2))
        p = _kink_free_params(s, seed, x)
        _, tape = forward(s, p, x)
        g, gx = backward(s, p, tape, U)

        def f_params(flat):
            return float(np.sum(U * forward(s, MlpParams(s, flat), x)[0]))

        assert rel_err(g, central_diff(f_params, p.flat.copy())) < 1e-5
        assert rel_err(gx, central_diff(lambda z: float(np.sum(U * forward(s, p, z)[0])), x)) < 1e-5

    def test_stale_tape(self):
        s = MlpSpec(2, (4,))
        p = init(s, Rng(0))
        _, tape = forward(s, p, np.ones((2, 2)))
        p.touch()
        with pytest.raises(TapeError):
            backward(s, p, tape, np.ones((2, 2)))

    def test_foreign_tape(self):
        s = MlpSpec(2, (4,))
        p, q = init(s, Rng(0)), init(s, Rng(1))
        _, tape = forward(s, p, np.ones((2, 2)))
        with pytest.raises(TapeError):
            backward(s, q, tape, np.ones((2, 2)))

    def test_upstream_shape(self):
        s = MlpSpec(2, (4,))
        p = init(s, Rng(0))
        _, tape = forward(s, p, np.ones((2, 2)))
        with pytest.raises(SizeError):
            backward(s, p, tape, np.ones((3, 2)))


def test_relu_growth_bound():
    r = np.linspace(-100, 100, 2001)
    assert np.all(np.abs(np.maximum(r, 0)) <= np.abs(r))


class TestEnsemble:
    def test_views_share_buffer(self):
        ens = MapEnsemble.initialize([MlpSpec(2, (4,)), MlpSpec(2, (4,))], Rng(0))
        ens.flat[:] = 0.0
        assert all(np.all(W == 0) for p in ens.params for W, _ in p.layers)

    def test_mismatched_dims(self):
        with pytest.raises(ValueError):
            MapEnsemble([MlpSpec(2, (4,)), MlpSpec(3, (4,))])

    def test_checkpoint_round_trip(self, tmp_path):
        specs = [MlpSpec(2, (16, 8), activation="tanh"), MlpSpec(2, (4, 4, 4))]
        ens = MapEnsemble.initialize(specs, Rng(9))
        ens.flat += Rng(10).standard_normal(ens.flat.size)
        path = tmp_path / "maps.bin"
        save_checkpoint(path, ens)
        back = load_checkpoint(path)
        assert back.specs == specs
        assert back.flat.tobytes() == ens.flat.tobytes()
        x = np.random.default_rng(0).normal(size=(5, 2))
        for a, b in zip(ens.push(x), back.push(x)):
            assert a.tobytes() == b.tobytes()

    def test_checkpoint_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTACHKPT")
        with pytest.raises(ValueError):
            load_checkpoint(path)
