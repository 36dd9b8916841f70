from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvtomo.errors import DomainError
from cvtomo.fock import DensityMatrix, QuadratureData, fock_wavefunction_derivatives, fock_wavefunctions
from cvtomo.pattern import (
    X_STABLE,
    estimate_density_matrix,
    irregular_wavefunction,
    irregular_wavefunctions,
    pattern_function,
    pattern_functions,
    pattern_table,
    photon_number_stats,
)
from cvtomo.sampler import AcquisitionPlan, sample
from cvtomo.states import StateSpec, build, rho_meas

# pi^(3/4) exp(-x^2/2) erfi(x) at 40 digits (mpmath)
PHI0_ORACLE = [
    (0.5, 1.2806099724199762),
    (1.0, 2.3621700391160744),
    (2.5, 13.519343473323378),
    (-1.7, -4.2079295117016012),
    (6.0, 14780672.524750138),
]

# higher orders from phi_{n+1} = (x phi_n - phi_n') / sqrt(2n+2) with the
# derivative taken by high-precision numerical differentiation (mpmath)
PHIN_ORACLE = [
    (1, 0.8, -0.385393527436973),
    (2, -1.1, 1.21636132514023),
    (3, 2.0, 0.152256776429694),
]

# M_mn(Q) = -FP int psi_m(x) psi_n(x) / (x - Q)^2 dx by mpmath quadrature
PATTERN_ORACLE = [
    (0, 0, 0.0, 2.0),
    (0, 0, 1.2, -0.43491278275715),
    (1, 1, 0.5, 0.273309150506067),
    (0, 2, -0.7, 0.599210028882082),
    (1, 3, 1.9, 1.2207753638143),
    (2, 2, 0.0, 2.0),
    (3, 3, 2.4, 0.793054139393222),
]


@pytest.mark.parametrize("x, expected", PHI0_ORACLE)
def test_irregular_ground_state(x, expected):
    assert irregular_wavefunction(0, x) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n, x, expected", PHIN_ORACLE)
def test_irregular_higher_orders(n, x, expected):
    assert irregular_wavefunction(n, x) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m, n, q, expected", PATTERN_ORACLE)
def test_pattern_function_finite_part_oracle(m, n, q, expected):
    assert pattern_function(m, n, q) == pytest.approx(expected, abs=1e-12)
    assert pattern_function(n, m, q) == pytest.approx(expected, abs=1e-12)


def test_irregular_functions_solve_oscillator_equation():
    x = np.linspace(-3, 3, 61)
    h = 1e-3
    for n in range(6):
        f = lambda t: irregular_wavefunctions(n, t)[0][n]
        second = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
        residual = second - (x**2 - 2 * n - 1) * f(x)
        assert np.max(np.abs(residual) / (1 + np.abs(f(x)))) < 1e-5


@given(st.floats(-5, 5), st.integers(0, 20))
def test_wronskian_is_constant(x, n):
    # psi_n phi_n' - psi_n' phi_n = 2 for every order
    psi = fock_wavefunctions(n, x)
    dpsi = fock_wavefunction_derivatives(n, x, psi)
    phi, dphi = irregular_wavefunctions(n, x)
    assert psi[n] * dphi[n] - dpsi[n] * phi[n] == pytest.approx(2.0, rel=1e-9)


def test_pattern_functions_are_dual_to_fock_densities():
    # int M_nn(x) psi_k(x)^2 dx = delta_nk for the diagonal sampling functions
    x = np.linspace(-9, 9, 9001)
    dx = x[1] - x[0]
    psi = fock_wavefunctions(5, x)
    m = pattern_functions(5, x)
    for n in range(6):
        for k in range(6):
            assert np.sum(m[n, n] * psi[k] ** 2) * dx == pytest.approx(float(n == k), abs=1e-6)


def test_off_diagonal_reconstruction_of_exact_marginals():
    # phase average of exp(i(m-n)th) M_mn(q) against exact marginals returns rho_mn
    rho = build(StateSpec("single_rail", {"c0": 0.6, "c1": 0.8j}, 3))
    q = np.linspace(-8, 8, 3201)
    th = np.arange(16) * 2 * np.pi / 16
    psi = fock_wavefunctions(3, q)
    m = pattern_functions(3, q)
    est = np.zeros((4, 4), dtype=complex)
    for t in th:
        u = psi * np.exp(1j * np.arange(4) * t)[:, None]
        pr = np.real(np.einsum("mx,mn,nx->x", u.conj(), rho.data, u))
        for a in range(4):
            for b in range(4):
                est[a, b] += np.sum(np.exp(1j * (a - b) * t) * m[a, b] * pr) * (q[1] - q[0]) / th.size
    assert np.allclose(est, rho.data, atol=1e-6)


def test_pattern_table_interpolation():
    table = pattern_table(4, 6.0)
    q = np.linspace(-5.9, 5.9, 37)
    assert np.allclose(table(q), pattern_functions(4, q), atol=1e-4)
    with pytest.raises(DomainError):
        table(np.array([7.0]))


def test_domain_guards():
    with pytest.raises(DomainError):
        irregular_wavefunction(0, X_STABLE + 1)
    with pytest.raises(DomainError):
        irregular_wavefunction(-1, 0.0)
    with pytest.raises(DomainError):
        estimate_density_matrix(QuadratureData([], []), 2)
    with pytest.raises(DomainError):
        photon_number_stats(QuadratureData([0.0], [13.0]), 2)


def test_unbiased_on_lossy_photon():
    d = sample(rho_meas(0.55, 1), AcquisitionPlan(100_000, 21))
    est = estimate_density_matrix(d, 3)
    diag = est.rho.diagonal()
    se = np.diag(est.se)
    assert abs(diag[0] - 0.45) < 5 * se[0]
    assert abs(diag[1] - 0.55) < 5 * se[1]
    assert abs(diag[2]) < 5 * se[2]


def test_coherences_of_qubit():
    rho = build(StateSpec("single_rail", {"c0": 1.0, "c1": 1.0}, 1))
    d = sample(rho, AcquisitionPlan(60_000, 8))
    est = estimate_density_matrix(d, 1)
    assert abs(est.rho.data[0, 1] - 0.5) < 5 * est.se[0, 1]
    assert np.allclose(est.rho.data, est.rho.data.conj().T)


def test_photon_statistics_need_no_phase():
    rho = build(StateSpec("coherent", {"alpha": 0.9}, 14))
    d = sample(rho, AcquisitionPlan(60_000, 13))
    # scramble phases: photon statistics depend only on q
    scrambled = QuadratureData(np.zeros(len(d)), d.q)
    p, se = photon_number_stats(scrambled, 4)
    assert np.all(np.abs(p - rho.diagonal()[:5]) < 5 * se)
    p2, _ = photon_number_stats(d, 4)
    assert np.allclose(p, p2)


def test_phase_coverage_warning():
    d = sample(DensityMatrix.vacuum(2), AcquisitionPlan(2000, 1, "fixed", phases=(0.0,)))
    with pytest.warns(UserWarning):
        estimate_density_matrix(d, 2)
