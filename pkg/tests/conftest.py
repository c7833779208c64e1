"""Shared fixtures and the dense conditional-Gaussian reference equalizer."""
import numpy as np
import pytest

from ftnsim import PulseSpec, isi_taps
from ftnsim.channel import build_convolution_matrix


@pytest.fixture(scope="session")
def spec():
    return PulseSpec()


@pytest.fixture(scope="session")
def profile_half(spec):
    """Deep-compression profile, full truncated-pulse support."""
    return isi_taps(spec, 0.5, 31)


@pytest.fixture(scope="session")
def profile_ortho(spec):
    return isi_taps(spec, 1.0, 15)


def dense_lmmse_oracle(r, taps, dmin, noise_cov, prior_mean, prior_var):
    """Textbook conditional-Gaussian posterior, one block, no structure exploited.

    r = H x + n with x ~ CN(pm, diag(pv)) entrywise independent and
    n ~ CN(0, noise_cov).  Returns (posterior mean, posterior variance diag).
    """
    r = np.asarray(r, dtype=complex)
    pm = np.asarray(prior_mean, dtype=complex)
    pv = np.asarray(prior_var, dtype=float)
    n = len(r)
    h = build_convolution_matrix(np.asarray(taps, dtype=float), dmin, n)
    s = (h * pv[None, :]) @ h.T + np.asarray(noise_cov, dtype=float)
    k = (pv[:, None] * h.T) @ np.linalg.inv(s)
    mean = pm + k @ (r - h @ pm)
    var = pv * (1.0 - np.einsum("ij,ji->i", k, h))
    return mean, var.real


def toeplitz_from_lags(lags, n):
    """Symmetric Toeplitz with the given one-sided lags, zero beyond them."""
    col = np.zeros(n)
    take = min(len(lags), n)
    col[:take] = np.asarray(lags, dtype=float)[:take]
    idx = np.arange(n)
    return col[np.abs(idx[:, None] - idx[None, :])]


def random_psd_lags(rng, support, scale=1.0):
    """One-sided autocovariance with finite support, PSD by spectral factorization."""
    g = rng.standard_normal(support + 1)
    full = np.correlate(g, g, mode="full")
    lags = full[support:]
    return scale * lags / lags[0]


def random_stable_ar(rng, order, k_max=0.9):
    """Stable AR coefficients from random reflection coefficients (step-up)."""
    a = np.zeros(0)
    for _ in range(order):
        k = rng.uniform(-k_max, k_max)
        a = np.concatenate((a - k * a[::-1], [k]))
    return a
