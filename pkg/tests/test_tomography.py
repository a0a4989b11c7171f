import math

import numpy as np
import pytest
from conftest import exact_tomo_records, random_density

from sagnacsim.counting import CountRecord, RateModel, derive_seed, simulate_counts
from sagnacsim.errors import ConvergenceError, ValidationError
from sagnacsim.polarization import (
    PSI_MINUS,
    PSI_PLUS,
    NoiseParams,
    SagnacParams,
    TwoQubitState,
    depolarize,
    source_state,
)
from sagnacsim.tomography import (
    TOMO_LABELS,
    Projector,
    bootstrap_errors,
    concurrence,
    fidelity,
    is_physical,
    linear_reconstruct,
    mle_reconstruct,
    project_psd,
    subtract_background,
    tomo_settings,
    trace_distance,
)

SINGLET = TwoQubitState.from_ket(PSI_MINUS)


def test_settings_layout():
    s = tomo_settings()
    assert len(s) == 16
    assert [p.label for p in s[:4]] == ["HH", "HV", "VH", "VV"]
    assert len(set(TOMO_LABELS)) == 16


def test_settings_informationally_complete():
    ops = np.array([p.operator.ravel() for p in tomo_settings()])
    gram = ops.conj() @ ops.T
    assert np.linalg.matrix_rank(gram) == 16


def test_projector_validation():
    with pytest.raises(ValidationError):
        Projector.from_label("HX")
    with pytest.raises(ValidationError):
        Projector("HH", np.array([1, 1]), np.array([1, 0]))


def test_linear_inversion_exact():
    lin = linear_reconstruct(exact_tomo_records(SINGLET))
    np.testing.assert_allclose(lin, SINGLET.matrix, atol=1e-10)
    lin = linear_reconstruct(exact_tomo_records(TwoQubitState.maximally_mixed()))
    np.testing.assert_allclose(lin, np.eye(4) / 4, atol=1e-10)


def test_linear_inversion_can_be_unphysical():
    m = RateModel(reference_coincidence_cps=2500, multipair_coeff=0, background_cps=0)
    recs = simulate_counts(SINGLET, tomo_settings(), m, 1.0, 4)
    lin = linear_reconstruct(recs)
    assert np.trace(lin).real == pytest.approx(1.0)
    assert not is_physical(lin)


def test_mle_noiseless_singlet():
    res = mle_reconstruct(exact_tomo_records(SINGLET))
    assert res.fidelity > 0.9999
    assert res.converged
    assert res.iterations > 0


def test_mle_output_physical_on_noisy_data():
    m = RateModel(reference_coincidence_cps=500, multipair_coeff=0, background_cps=0)
    for seed in range(5):
        res = mle_reconstruct(simulate_counts(SINGLET, tomo_settings(), m, 1.0, seed))
        assert np.linalg.eigvalsh(res.state.matrix).min() >= -1e-10
        assert 0 <= res.fidelity <= 1 and 0 <= res.concurrence <= 1


def test_mle_calibrated_source():
    rho = source_state(SagnacParams(), NoiseParams(extinction_ratio=250, phase_error=0.26))
    m = RateModel()
    recs = simulate_counts(rho, tomo_settings(), m, 10.0, derive_seed(1, 3))
    res = mle_reconstruct(subtract_background(recs, m.background_rate()))
    assert 0.97 <= res.fidelity <= 0.99
    assert 0.95 <= res.concurrence <= 0.99


def test_mle_psi_plus_target():
    rho = TwoQubitState.from_ket(PSI_PLUS)
    res = mle_reconstruct(exact_tomo_records(rho), target="psi+")
    assert res.fidelity > 0.9999


def test_mle_invariant_under_record_permutation():
    rho = depolarize(SINGLET, 0.05)
    recs = exact_tomo_records(rho)
    perm = np.random.default_rng(0).permutation(16)
    a = mle_reconstruct(recs)
    b = mle_reconstruct([recs[i] for i in perm])
    assert a.fidelity == pytest.approx(b.fidelity, abs=1e-8)
    assert a.concurrence == pytest.approx(b.concurrence, abs=1e-8)


def test_tomography_input_validation():
    with pytest.raises(ValidationError):
        mle_reconstruct(exact_tomo_records(SINGLET)[:10])
    zero = [CountRecord(p.label, 0, 0, 1, 0) for p in tomo_settings()]
    with pytest.raises(ValidationError):
        linear_reconstruct(zero)


def test_fidelity_and_concurrence_basics():
    assert fidelity(SINGLET, PSI_MINUS) == pytest.approx(1.0)
    assert concurrence(SINGLET) == pytest.approx(1.0, abs=1e-7)
    product = TwoQubitState.from_ket(np.kron([1, 0], [0.6, 0.8]))
    assert concurrence(product) == pytest.approx(0.0, abs=1e-7)
    assert fidelity(depolarize(SINGLET, 0.0253), PSI_MINUS) == pytest.approx(
        1 - 3 * 0.0253 / 4, abs=1e-12
    )


def test_werner_concurrence_example():
    rho = depolarize(SINGLET, 1 - 0.98)
    assert concurrence(rho) == pytest.approx(0.97, abs=1e-9)


def test_project_psd():
    m = np.diag([0.6, 0.5, 0.0, -0.1]).astype(complex)
    p = project_psd(m)
    assert np.linalg.eigvalsh(p).min() >= 1e-7
    assert np.trace(p).real == pytest.approx(1.0)


def test_trace_distance():
    assert trace_distance(SINGLET, SINGLET) == 0.0
    assert trace_distance(SINGLET, TwoQubitState.from_ket(PSI_PLUS)) == pytest.approx(1.0)


def test_bootstrap_deterministic_and_small():
    rho = source_state(SagnacParams(), NoiseParams(extinction_ratio=250, phase_error=0.26))
    m = RateModel()
    recs = simulate_counts(rho, tomo_settings(), m, 10.0, 9)
    a = bootstrap_errors(recs, 10, 4, background_cps=m.background_rate())
    b = bootstrap_errors(recs, 10, 4, background_cps=m.background_rate())
    assert a == b
    assert 1e-4 < a.sigma_fidelity < 1e-2
    assert a.failures == 0


def test_bootstrap_zero_variance_stub():
    recs = exact_tomo_records(depolarize(SINGLET, 0.05), 1e5)
    res = bootstrap_errors(recs, 3, 0, resampler=lambda c, rng: c.copy())
    assert res.sigma_fidelity == pytest.approx(0.0, abs=1e-12)
    assert res.sigma_concurrence == pytest.approx(0.0, abs=1e-12)


def test_bootstrap_aborts_on_failures():
    recs = exact_tomo_records(SINGLET)
    with pytest.raises(ConvergenceError):
        bootstrap_errors(recs, 4, 0, resampler=lambda c, rng: np.zeros_like(c))
    with pytest.raises(ValidationError):
        bootstrap_errors(recs, 1, 0)


def test_bootstrap_sigma_shrinks_with_time():
    rho = source_state(SagnacParams(), NoiseParams(extinction_ratio=250, phase_error=0.26))
    m = RateModel(multipair_coeff=0, background_cps=0)
    s1 = bootstrap_errors(simulate_counts(rho, tomo_settings(), m, 5.0, 1), 30, 2).sigma_fidelity
    s2 = bootstrap_errors(simulate_counts(rho, tomo_settings(), m, 10.0, 1), 30, 2).sigma_fidelity
    assert s1 / s2 == pytest.approx(math.sqrt(2), rel=0.35)
