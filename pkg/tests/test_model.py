"""Instance generation, RNG streams, SVD cache, and empirical measures."""

import numpy as np
import pytest

from rectoamp.model import (ModelError, PriorModel, component_rng,
                            dump_instance, empirical_signal_measures,
                            load_instance, make_instance, measure_moments,
                            sample_haar_orthogonal, sample_ri_noise,
                            thin_svd)


class TestRng:
    def test_reproducible(self):
        a = component_rng(7, "noise").standard_normal(5)
        b = component_rng(7, "noise").standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_independent(self):
        a = component_rng(7, "u").standard_normal(5)
        b = component_rng(7, "v").standard_normal(5)
        assert not np.allclose(a, b)

    def test_unknown_stream(self):
        with pytest.raises(KeyError):
            component_rng(7, "bogus")


class TestPriors:
    def test_rademacher_values(self):
        x = PriorModel("rademacher").sample(1000, component_rng(0, "u"))
        assert set(np.unique(x)) == {-1.0, 1.0}

    def test_gaussian_moments(self):
        x = PriorModel("gaussian").sample(200000, component_rng(0, "u"))
        assert np.mean(x) == pytest.approx(0.0, abs=0.02)
        assert np.var(x) == pytest.approx(1.0, abs=0.02)

    def test_invalid(self):
        with pytest.raises(ModelError):
            PriorModel("poisson")
        with pytest.raises(ModelError):
            PriorModel("rademacher", side_info_strength=1.0)


class TestNoise:
    def test_haar_orthogonal(self):
        q = sample_haar_orthogonal(50, component_rng(3, "noise"))
        assert np.allclose(q @ q.T, np.eye(50), atol=1e-12)

    def test_ri_noise_spectrum(self, mp05):
        w = sample_ri_noise(mp05, 300, 600, component_rng(1, "noise"))
        lam = np.linalg.eigvalsh(w @ w.T)
        # first two moments of the quarter-circle-squared law
        assert np.mean(lam) == pytest.approx(1.0, abs=0.1)
        assert np.mean(lam ** 2) == pytest.approx(1.5, abs=0.2)

    def test_ri_noise_rejects_tall(self, mp05):
        with pytest.raises(ModelError):
            sample_ri_noise(mp05, 10, 5, component_rng(0, "noise"))


class TestInstances:
    def test_shapes_and_side_info(self, mp05):
        prior = PriorModel("rademacher", 0.25)
        inst = make_instance(prior, prior, "gaussian", 400, 800, 2.0, 11)
        assert inst.Y.shape == (400, 800)
        assert inst.delta == 0.5
        # side channel a = sqrt(w0) u* + sqrt(1-w0) z
        corr = (inst.a @ inst.u_star) ** 2 / (
            (inst.a @ inst.a) * (inst.u_star @ inst.u_star))
        assert corr == pytest.approx(0.25, abs=0.08)

    def test_signal_scaling(self):
        prior = PriorModel("rademacher")
        inst = make_instance(prior, prior, "gaussian", 400, 800, 3.0, 5)
        # spectral norm of the spike is theta for unit-RMS factors
        spike = inst.Y - inst.W
        assert np.linalg.norm(spike, 2) == pytest.approx(3.0, rel=1e-10)

    def test_invalid_dimensions(self):
        prior = PriorModel("rademacher")
        with pytest.raises(ModelError):
            make_instance(prior, prior, "gaussian", 800, 400, 1.0, 0)

    def test_unknown_noise(self):
        prior = PriorModel("rademacher")
        with pytest.raises(ModelError):
            make_instance(prior, prior, "cauchy", 10, 20, 1.0, 0)


class TestSvdAndMeasures:
    def test_thin_svd_reconstructs(self):
        prior = PriorModel("rademacher")
        inst = make_instance(prior, prior, "gaussian", 100, 200, 1.0, 2)
        svd = thin_svd(inst.Y)
        recon = (svd.U * svd.singular_values) @ svd.V.T
        assert np.allclose(recon, inst.Y, atol=1e-10)
        assert np.all(np.diff(svd.singular_values) <= 0)

    def test_empirical_measure_masses(self):
        prior = PriorModel("rademacher")
        inst = make_instance(prior, prior, "gaussian", 200, 400, 2.0, 4)
        svd = thin_svd(inst.Y)
        meas = empirical_signal_measures(inst, svd)
        # total nu_M1 mass = |u*|^2 / M = 1 for Rademacher
        assert np.sum(meas.nu_M1[1]) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(meas.nu_N2[1]) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(meas.nu_L3[1]) == pytest.approx(0.0, abs=1e-12)
        assert meas.nu_N2[1][-1] >= 0.0   # null-space mass

    def test_measure_moments(self):
        vals = np.array([1.0, 2.0])
        weights = np.array([0.5, 0.5])
        assert np.allclose(measure_moments(vals, weights),
                           [1.0, 1.5, 2.5, 4.5])


class TestDump:
    def test_round_trip(self, tmp_path):
        prior = PriorModel("rademacher", 0.04)
        inst = make_instance(prior, prior, "gaussian", 50, 100, 2.0, 9)
        path = tmp_path / "inst.npz"
        dump_instance(inst, path, spectrum_descriptor="mp(0.5)")
        loaded, header = load_instance(path)
        assert np.array_equal(loaded.Y, inst.Y)
        assert np.array_equal(loaded.a, inst.a)
        assert loaded.seed == 9 and header["spectrum"] == "mp(0.5)"
