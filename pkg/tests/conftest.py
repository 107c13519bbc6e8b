"""Shared fixtures: analytic objects and cached Monte-Carlo ensembles."""

import numpy as np
import pytest

from rectoamp.baselines import gaussian_amp_run, pca_estimate
from rectoamp.model import (PriorModel, empirical_signal_measures,
                            make_instance, measure_moments, thin_svd)
from rectoamp.oamp import optimal_oamp_run
from rectoamp.scalar_channel import ScalarChannel
from rectoamp.spectra import MarchenkoPastur, ShiftedBeta, ShrinkageSet

THETA = 2.0
DELTA = 0.5
W0 = 0.04
M_DESK, N_DESK = 1000, 2000
N_SEEDS = 20
T_DESK = 10


@pytest.fixture(scope="session")
def mp05():
    return MarchenkoPastur(DELTA)


@pytest.fixture(scope="session")
def beta_spectrum():
    return ShiftedBeta(1.5, 1.5, 1.0, 3.0, DELTA)


@pytest.fixture(scope="session")
def shrink_mp2(mp05):
    return ShrinkageSet(mp05, THETA)


@pytest.fixture(scope="session")
def shrink_beta2(beta_spectrum):
    with pytest.warns(RuntimeWarning, match="unverified branch"):
        s = ShrinkageSet(beta_spectrum, THETA)
        s.find_spectral_atoms()
    return s


@pytest.fixture(scope="session")
def channels():
    return ScalarChannel("rademacher", W0), ScalarChannel("rademacher", W0)


def run_seed(spectrum, noise, theta, M, N, seed, shrinkage=None, channels=None,
             n_iter=T_DESK, keep_iterates=(), with_amp=False, with_oamp=True):
    """One seed's worth of everything the acceptance suite consumes."""
    prior = PriorModel("rademacher", W0)
    inst = make_instance(prior, prior, noise, M, N, theta, seed)
    svd = thin_svd(inst.Y)
    meas = empirical_signal_measures(inst, svd)
    out = {
        "top_eig": float(svd.eigenvalues[0]),
        "mom_nu1": measure_moments(*meas.nu_M1),
        "mom_nu2": measure_moments(*meas.nu_N2),
        "nu2_zero_mass": float(meas.nu_N2[1][-1]),
        "pca": pca_estimate(inst, svd)[2:],
    }
    if with_oamp and shrinkage is not None:
        tr = optimal_oamp_run(inst, svd, shrinkage, channels[0], channels[1],
                              n_iter, keep_iterates=keep_iterates)
        out["oamp"] = tr
        if keep_iterates:
            out["residuals"] = {
                t: (tr.iterates[t][0], inst.u_star) for t in keep_iterates}
    if with_amp:
        out["amp"] = gaussian_amp_run(inst, channels[0], channels[1], n_iter)
    return out


@pytest.fixture(scope="session")
def ens_fig1(mp05, shrink_mp2, channels):
    """Gaussian noise, theta=2: OAMP + AMP, iterates kept at t in {1, 3}."""
    return [run_seed(mp05, "gaussian", THETA, M_DESK, N_DESK, seed,
                     shrink_mp2, channels, keep_iterates=(1, 3), with_amp=True)
            for seed in range(N_SEEDS)]


@pytest.fixture(scope="session")
def ens_beta2(beta_spectrum, shrink_beta2, channels):
    """RI Beta noise, theta=2: OAMP + PCA + empirical measures."""
    return [run_seed(beta_spectrum, beta_spectrum, THETA, M_DESK, N_DESK,
                     seed, shrink_beta2, channels)
            for seed in range(N_SEEDS)]


@pytest.fixture(scope="session")
def ens_measures_only(mp05, beta_spectrum):
    """Empirical signal measures for the (spectrum, theta) pairs of the
    induced-measure moment checks; the (beta, 2.0) case is in ens_beta2."""
    out = {}
    for key, spectrum, theta in (("mp1", mp05, 1.0), ("mp2", mp05, 2.0),
                                 ("beta1", beta_spectrum, 1.0)):
        out[key] = [run_seed(spectrum, spectrum, theta, M_DESK, N_DESK, seed,
                             with_oamp=False)
                    for seed in range(N_SEEDS)]
    return out


@pytest.fixture(scope="session")
def ens_outlier(mp05):
    """Larger instances for the outlier location / PCA overlap check."""
    return [run_seed(mp05, "gaussian", THETA, 2000, 4000, seed, with_oamp=False)
            for seed in range(10)]
