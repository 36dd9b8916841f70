from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvtomo.errors import DomainError, IllConditionedError, SingularDataError
from cvtomo.fock import DensityMatrix, QuadratureData, bernoulli_loss, fidelity
from cvtomo.maxlik import (
    HomodyneModel,
    MaxlikConfig,
    binned_model,
    bias_corrected_iterate,
    bootstrap_errors,
    build_povm,
    completeness_operator,
    iterate,
    log_likelihood,
    r_operator,
)
from cvtomo.sampler import AcquisitionPlan, sample
from cvtomo.states import StateSpec, build, rho_meas


def random_state(seed, dim):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return DensityMatrix(m / np.trace(m).real)


@pytest.mark.parametrize("eta", [1.0, 0.62, 0.3])
def test_povm_is_positive_and_hermitian(eta):
    el = build_povm(0.4, 1.3, eta, 6)
    m = el.matrix
    assert np.allclose(m, m.conj().T, atol=1e-15)
    assert np.min(np.linalg.eigvalsh(m)) > -1e-14


@given(st.floats(-4, 4), st.floats(0, 2 * np.pi), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_lossy_povm_duality(q, theta, eta, seed):
    rho = random_state(seed, 7)
    lossy = build_povm(q, theta, eta, 6).probability(rho)
    ideal = build_povm(q, theta, 1.0, 6).probability(bernoulli_loss(rho, eta))
    assert lossy == pytest.approx(ideal, abs=1e-12)


def test_povm_phase_periodicity():
    a = build_povm(0.7, 0.9, 0.8, 5).matrix
    b = build_povm(0.7, 0.9 + 2 * np.pi, 0.8, 5).matrix
    assert np.allclose(a, b, atol=1e-13)
    # theta + pi with q -> -q is the same outcome
    c = build_povm(-0.7, 0.9 + np.pi, 0.8, 5).matrix
    assert np.allclose(a, c, atol=1e-13)


def test_povm_guards():
    with pytest.raises(DomainError):
        build_povm(0.0, 0.0, 0.0, 3)
    with pytest.raises(DomainError):
        build_povm(np.nan, 0.0, 1.0, 3)
    with pytest.raises(DomainError):
        MaxlikConfig(epsilon=0.0)
    with pytest.raises(DomainError):
        HomodyneModel(QuadratureData([], []), 3)


def test_vacuum_likelihood_at_origin():
    ll = log_likelihood(DensityMatrix.vacuum(3), QuadratureData([0.0], [0.0]))
    assert ll == pytest.approx(np.log(np.pi**-0.5), abs=1e-14)
    assert ll == pytest.approx(-0.5723649429247001, abs=1e-14)


def test_duplicated_data_doubles_likelihood():
    rho = build(StateSpec("coherent", {"alpha": 0.5}, 8))
    d = sample(rho, AcquisitionPlan(300, 2))
    dd = QuadratureData(np.concatenate([d.theta, d.theta]), np.concatenate([d.q, d.q]))
    assert log_likelihood(rho, dd) == pytest.approx(2 * log_likelihood(rho, d), rel=1e-13)


def test_likelihood_prefers_truth():
    rho = build(StateSpec("single_rail", {"c0": 0.6, "c1": 0.8}, 3))
    d = sample(rho, AcquisitionPlan(5000, 4))
    truth = log_likelihood(rho, d)
    for other in (DensityMatrix.vacuum(3), DensityMatrix.fock(1, 3), random_state(1, 4)):
        assert truth > log_likelihood(other, d)


def test_single_sample_iteration_operator():
    rho = random_state(3, 5)
    el = build_povm(0.3, 0.5, 1.0, 4)
    r = r_operator(rho, QuadratureData([0.5], [0.3]))
    assert np.allclose(r, el.matrix / el.probability(rho), atol=1e-12)
    assert np.allclose(r, r_operator(rho, None, povms=[el]), atol=1e-12)


@pytest.mark.parametrize("eta", [1.0, 0.7])
def test_iteration_operator_expectation_is_one(eta):
    rho = random_state(5, 6)
    d = sample(build(StateSpec("coherent", {"alpha": 0.6}, 12)), AcquisitionPlan(500, 6))
    r = r_operator(rho, d, eta=eta)
    assert np.real(np.trace(r @ rho.data)) == pytest.approx(1.0, abs=1e-12)


def test_singular_data_names_the_sample():
    # the single photon has a node at the origin of every quadrature
    d = QuadratureData([0.1, 0.2], [1.0, 0.0])
    with pytest.raises(SingularDataError, match="sample 1"):
        r_operator(DensityMatrix.fock(1, 2), d)
    with pytest.raises(SingularDataError, match="sample 1"):
        r_operator(DensityMatrix.fock(1, 2), None, povms=[build_povm(q, t, 1.0, 2) for t, q in zip(d.theta, d.q)])


def test_parity_symmetric_data_gives_parity_symmetric_operator():
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * np.pi, 50)
    q = rng.normal(size=50)
    d = QuadratureData(np.concatenate([th, th]), np.concatenate([q, -q]))
    r = r_operator(np.eye(6) / 6, d)
    parity = np.diag((-1.0) ** np.arange(6))
    assert np.allclose(parity @ r, r @ parity, atol=1e-13)


def test_vacuum_reconstruction():
    d = sample(DensityMatrix.vacuum(4), AcquisitionPlan(20_000, 7))
    res = iterate(None, d, MaxlikConfig(n_max=4))
    assert fidelity(res.rho, DensityMatrix.vacuum(4)) >= 0.995
    res.rho.validate(herm_tol=1e-12, trace_tol=1e-12)
    assert np.min(np.linalg.eigvalsh(res.rho.data)) > -1e-12


def test_uncorrected_lossy_photon_is_the_measured_mixture():
    d = sample(rho_meas(0.62, 4), AcquisitionPlan(30_000, 8))
    res = iterate(None, d, MaxlikConfig(n_max=4))
    diag = res.rho.diagonal()
    assert diag[0] == pytest.approx(0.38, abs=0.03)
    assert diag[1] == pytest.approx(0.62, abs=0.03)


def test_loss_corrected_photon():
    d = sample(DensityMatrix.fock(1, 5), AcquisitionPlan(20_000, 9, eta=0.7))
    res = iterate(None, d, MaxlikConfig(n_max=5, eta=0.7))
    assert fidelity(res.rho, DensityMatrix.fock(1, 5)) > 0.95


def test_diluted_iteration_is_monotone():
    d = sample(build(StateSpec("coherent", {"alpha": 0.8}, 8)), AcquisitionPlan(3000, 10))
    res = iterate(None, d, MaxlikConfig(n_max=6, epsilon=0.05, max_iters=200, adapt_epsilon=False))
    assert np.all(np.diff(res.log_likelihood) >= -1e-9 * abs(res.log_likelihood[-1]))


def test_unrestricted_step_never_lowers_likelihood():
    d = sample(build(StateSpec("odd_cat", {"alpha": 1.0}, 12)), AcquisitionPlan(3000, 11))
    res = iterate(None, d, MaxlikConfig(n_max=8, epsilon=np.inf, max_iters=300))
    assert np.all(np.diff(res.log_likelihood) >= 0)
    assert len(res.epsilon_trace) == res.iterations + 1
    if res.fallback_used:
        assert 1.0 in res.epsilon_trace


def test_non_convergence_is_reported():
    d = sample(build(StateSpec("coherent", {"alpha": 1.0}, 10)), AcquisitionPlan(1000, 12))
    res = iterate(None, d, MaxlikConfig(n_max=6, max_iters=3))
    assert not res.converged
    assert res.iterations == 3
    assert len(res.log_lines()) == 4
    assert res.log_lines()[0].split()[0] == "0"


def test_initial_state_dimension_checked():
    d = sample(DensityMatrix.vacuum(2), AcquisitionPlan(100, 1))
    with pytest.raises(DomainError):
        iterate(np.eye(3) / 3, d, MaxlikConfig(n_max=4))


def test_identity_completeness_reduces_to_plain_iteration():
    d = sample(build(StateSpec("coherent", {"alpha": 0.5}, 8)), AcquisitionPlan(2000, 13))
    cfg = MaxlikConfig(n_max=5, max_iters=100)
    plain = iterate(None, d, cfg)
    scaled = bias_corrected_iterate(None, d, cfg, G=2.5 * np.eye(6))
    assert np.array_equal(plain.rho.data, scaled.rho.data)
    assert np.allclose(completeness_operator(d, 5), np.eye(6))


def test_window_correction_removes_truncation_bias():
    rho = DensityMatrix.fock(1, 6)
    d = sample(rho, AcquisitionPlan(20_000, 5))
    keep = np.abs(d.q) < 1.0
    dw = QuadratureData(d.theta[keep], d.q[keep])
    cfg = MaxlikConfig(n_max=6, max_iters=500)
    plain = iterate(None, dw, cfg)
    fixed = bias_corrected_iterate(None, dw, cfg, window=(-1.0, 1.0))
    err_plain = np.abs(plain.rho.data - rho.data).sum()
    err_fixed = np.abs(fixed.rho.data - rho.data).sum()
    assert err_fixed < 0.5 * err_plain
    assert fidelity(fixed.rho, rho) > 0.9
    # the same window recovered from the recorded range
    auto = iterate(None, dw, MaxlikConfig(n_max=6, max_iters=500, bias_correction=True))
    assert auto.g_condition is not None
    assert np.abs(auto.rho.data - rho.data).sum() < 0.5 * err_plain


def test_completeness_conditioning_guards():
    d = QuadratureData([0.0, 1.0], [0.0, 0.1])
    with pytest.warns(UserWarning, match="condition"):
        bias_corrected_iterate(None, d, MaxlikConfig(n_max=1, max_iters=2), G=np.diag([1.0, 1e-4]))
    with pytest.raises(IllConditionedError):
        bias_corrected_iterate(None, d, MaxlikConfig(n_max=1, max_iters=2), G=np.diag([1.0, 1e-13]))
    with pytest.raises(DomainError):
        completeness_operator(d, 2, window=(1.0, -1.0))


def test_bootstrap_with_identical_seeds_has_no_spread():
    plan = AcquisitionPlan(500, 0)
    with pytest.warns(UserWarning):
        spread, recon = bootstrap_errors(DensityMatrix.vacuum(2), plan, 3, 0, MaxlikConfig(n_max=2),
                                         seeds=[4, 4, 4], return_samples=True)
    assert np.array_equal(recon[0], recon[1]) and np.array_equal(recon[0], recon[2])
    # only the round-off of the mean remains
    assert np.max(spread) < 1e-15
    with pytest.raises(DomainError):
        bootstrap_errors(DensityMatrix.vacuum(2), plan, 1, 0)


def test_bootstrap_vacuum_error_is_small_and_reproducible():
    plan = AcquisitionPlan(5000, 0)
    cfg = MaxlikConfig(n_max=3)
    a = bootstrap_errors(DensityMatrix.vacuum(3), plan, 10, 21, cfg)
    b = bootstrap_errors(DensityMatrix.vacuum(3), plan, 10, 21, cfg)
    assert np.array_equal(a, b)
    assert a[0, 0] < 0.01
    assert a.shape == (4, 4)


def test_binned_model_matches_per_sample_model():
    rho = build(StateSpec("single_rail", {"c0": 0.6, "c1": 0.8}, 3))
    d = sample(rho, AcquisitionPlan(40_000, 14))
    cfg = MaxlikConfig(n_max=3)
    direct = iterate(None, d, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        binned = iterate(None, d, cfg, model=binned_model(d, 3, n_phase_bins=64, n_q_bins=256))
    assert np.max(np.abs(direct.rho.data - binned.rho.data)) < 0.01
