"""Randomized invariants: channels, Bell bound, estimators and reconstruction."""

import math

import numpy as np
import pytest
from conftest import exact_tomo_records, random_density
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnacsim.counting import RateModel, chsh_from_records, chsh_settings, simulate_counts
from sagnacsim.crystal import phase_matched, telecom_crystal
from sagnacsim.polarization import (
    PSI_MINUS,
    TSIRELSON,
    NoiseParams,
    SagnacParams,
    TwoQubitState,
    apply_kraus,
    chsh_S,
    depolarize,
    pbs_leak,
    source_state,
)
from sagnacsim.spectral import PumpConfig, SpectralGrid, compute_jsa, schmidt
from sagnacsim.tomography import concurrence, fidelity, mle_reconstruct, trace_distance

N_CASES = 10_000
SINGLET = TwoQubitState.from_ket(PSI_MINUS)


def random_kraus(rng, n_ops):
    """Kraus operators cut from a random 4n x 4 isometry."""
    z = rng.normal(size=(4 * n_ops, 4)) + 1j * rng.normal(size=(4 * n_ops, 4))
    q, _ = np.linalg.qr(z)
    return [q[4 * k: 4 * k + 4, :] for k in range(n_ops)]


def assert_state(m):
    assert np.max(np.abs(m - m.conj().T)) <= 1e-12
    assert abs(np.trace(m).real - 1) <= 1e-12
    assert np.linalg.eigvalsh(m).min() >= -1e-10


def test_random_channels_preserve_states():
    rng = np.random.default_rng(2024)
    for i in range(N_CASES):
        rho = random_density(rng, int(rng.integers(1, 5)))
        kind = i % 3
        if kind == 0:
            out = apply_kraus(rho, random_kraus(rng, int(rng.integers(1, 5))))
        elif kind == 1:
            out = depolarize(rho, float(rng.uniform()))
        else:
            out = pbs_leak(rho, float(1 + rng.exponential(50)))
        assert_state(out.matrix)


def test_tsirelson_bound_random_states():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(N_CASES):
        rho = random_density(rng, int(rng.integers(1, 5)))
        angles = rng.uniform(0, 180, size=4)
        worst = max(worst, chsh_S(rho, *angles))
    assert worst <= TSIRELSON + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_werner_concurrence_closed_form(v):
    rho = depolarize(SINGLET, 1.0 - v)
    assert abs(concurrence(rho) - max(0.0, (3 * v - 1) / 2)) < 1e-9
    assert fidelity(rho, PSI_MINUS) == pytest.approx((1 + 3 * v) / 4, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.05, 20.0))
def test_sagnac_family_concurrence(phase, ratio):
    rho = source_state(SagnacParams(phase, ratio), NoiseParams())
    assert concurrence(rho) == pytest.approx(2 * ratio / (1 + ratio**2), abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fidelity_and_concurrence_in_unit_interval(seed):
    rho = random_density(np.random.default_rng(seed))
    assert 0 <= fidelity(rho, PSI_MINUS) <= 1
    assert 0 <= concurrence(rho) <= 1


def test_chsh_sigma_matches_ensemble_spread():
    rho = source_state(SagnacParams(), NoiseParams(extinction_ratio=250, phase_error=0.26))
    m = RateModel()
    bg = m.background_rate()
    values, sigmas = [], []
    for seed in range(500):
        s, sigma = chsh_from_records(simulate_counts(rho, chsh_settings(), m, 1.0, seed), bg)
        values.append(s)
        sigmas.append(sigma)
    spread = np.std(values, ddof=1)
    assert spread == pytest.approx(np.mean(sigmas), rel=0.2)


def test_mle_recovers_random_states():
    rng = np.random.default_rng(99)
    worst = 0.0
    for k in range(200):
        # a quarter each of rank 1, 2, 3 and 4
        rho = random_density(rng, k % 4 + 1)
        res = mle_reconstruct(exact_tomo_records(rho))
        assert_state(res.state.matrix)
        worst = max(worst, trace_distance(res.state, rho))
    assert worst < 1e-5


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(5.0, 50.0))
def test_jsa_normalization_and_schmidt_sum(fwhm_nm, length_mm):
    c = phase_matched(telecom_crystal(length_mm=length_mm), 0.775)
    j = compute_jsa(c, PumpConfig(775.0, fwhm_nm), SpectralGrid.centered(1550.0, 6.0, 48))
    assert j.norm() == pytest.approx(1.0, abs=1e-12)
    res = schmidt(j)
    assert res.coefficients.sum() == pytest.approx(1.0, abs=1e-12)
    assert 0 < res.purity <= 1 + 1e-12
