import math

import numpy as np
import pytest

from mm_monge.data import CsvParseError, MarginalSpec, generate, load_csv, save_csv
from mm_monge.tensor_rng import Rng, SizeError


class TestGaussian:
    def test_mean_and_sd(self):
        x = generate(MarginalSpec("isotropic_gaussian", mean=3.0, sd=1.0, n=10_000), Rng(1))
        assert x.shape == (10_000, 2)
        assert 2.96 < x.mean() < 3.04
        assert np.all(np.abs(x.std(axis=0) - 1.0) < 0.05)

    def test_vector_mean(self):
        x = generate(MarginalSpec("isotropic_gaussian", mean=(1.0, -5.0), sd=0.5, n=10_000), Rng(2))
        np.testing.assert_allclose(x.mean(axis=0), [1.0, -5.0], atol=4 * 0.5 / 100)

    def test_deterministic(self):
        spec = MarginalSpec("isotropic_gaussian", mean=3.0)
        assert generate(spec, Rng(5)).tobytes() == generate(spec, Rng(5)).tobytes()


class TestMoons:
    def test_noise_free_on_arcs(self):
        x = generate(MarginalSpec("two_moons", noise=0.0, n=501), Rng(3))
        n_top = math.ceil(501 / 2)
        top, bottom = x[:n_top], x[n_top:]
        np.testing.assert_allclose(top[:, 0] ** 2 + top[:, 1] ** 2, 1.0, atol=1e-9)
        assert np.all(top[:, 1] >= -1e-12)
        np.testing.assert_allclose((bottom[:, 0] - 1) ** 2 + (bottom[:, 1] - 0.5) ** 2, 1.0, atol=1e-9)
        assert np.all(bottom[:, 1] <= 0.5 + 1e-12)
        assert len(top) == 251 and len(bottom) == 250


class TestCircles:
    def test_noise_free_radii(self):
        x = generate(MarginalSpec("two_circles", noise=0.0, factor=0.5, n=501), Rng(4))
        r = np.hypot(x[:, 0], x[:, 1])
        assert np.all(np.minimum(np.abs(r - 1.0), np.abs(r - 0.5)) < 1e-9)
        assert np.sum(np.abs(r - 1.0) < 1e-9) == 251
        assert np.sum(np.abs(r - 0.5) < 1e-9) == 250

    @pytest.mark.parametrize("factor", [0.0, 1.0, 1.5])
    def test_bad_factor(self, factor):
        with pytest.raises(ValueError):
            MarginalSpec("two_circles", factor=factor)


def test_invalid_specs():
    with pytest.raises(SizeError):
        MarginalSpec("isotropic_gaussian", n=0)
    with pytest.raises(ValueError):
        MarginalSpec("isotropic_gaussian", sd=0.0)
    with pytest.raises(ValueError):
        MarginalSpec("two_moons", noise=-0.1)
    with pytest.raises(ValueError):
        MarginalSpec("csv_file")


class TestCsv:
    def test_round_trip(self, tmp_path, nprng):
        m = nprng.normal(size=(3, 2)) * 1e3
        save_csv(tmp_path / "a.csv", m)
        back = load_csv(tmp_path / "a.csv")
        assert np.max(np.abs(back - m)) <= 1e-12 * np.max(np.abs(m))
        assert back.tobytes() == m.tobytes()  # 17 digits round-trips exactly

    def test_header_and_rows(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("x0,x1\n0.5,1.25\n-3,4e-2\n")
        np.testing.assert_array_equal(load_csv(p), [[0.5, 1.25], [-3.0, 0.04]])

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("x0,x1\n1,2\n1,2,3\n")
        with pytest.raises(CsvParseError, match=":3:") as info:
            load_csv(p)
        assert info.value.line == 3

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x0,x1\n1,abc\n")
        with pytest.raises(CsvParseError, match=":2:"):
            load_csv(p)

    def test_empty(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("x0,x1\n")
        with pytest.raises(SizeError):
            load_csv(p)

    def test_csv_marginal(self, tmp_path, nprng):
        m = nprng.normal(size=(10, 2))
        save_csv(tmp_path / "m.csv", m)
        spec = MarginalSpec("csv_file", path=str(tmp_path / "m.csv"))
        np.testing.assert_array_equal(generate(spec, Rng(0)), m)
