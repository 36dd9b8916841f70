from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cvtomo.errors import DomainError
from cvtomo.fock import DensityMatrix, GridSpec, QuadratureData, fock_wavefunctions, wigner
from cvtomo.radon import RadonConfig, backproject, kernel, reconstruct
from cvtomo.sampler import AcquisitionPlan, sample
from cvtomo.states import StateSpec, build


@given(st.floats(-20, 20), st.floats(0.5, 10))
def test_kernel_is_band_limited_ramp(x, kc):
    # K(x) = int_0^kc xi cos(xi x) d xi
    ref, _ = quad(lambda xi: xi * np.cos(xi * x), 0, kc, limit=200)
    assert kernel(x, kc) == pytest.approx(ref, abs=1e-9 * kc**2)


def test_kernel_series_is_continuous():
    kc = 4.0
    cut = 1e-2 / kc
    below = kernel(cut * (1 - 1e-9), kc)
    above = kernel(cut * (1 + 1e-9), kc)
    assert below == pytest.approx(above, rel=1e-9)
    assert kernel(0.0, kc) == kc**2 / 2
    xs = np.linspace(-1e-3, 1e-3, 11)
    assert np.allclose(kernel(xs, kc), kernel(-xs, kc))
    with pytest.raises(DomainError):
        kernel(0.1, 0.0)


def exact_vacuum_data(n_theta=64, n_q=2001, span=7.0):
    """Quadrature points weighted by the exact vacuum marginal at uniform phases."""
    q = np.linspace(-span, span, n_q)
    pr = fock_wavefunctions(0, q)[0] ** 2
    theta = np.repeat(np.arange(n_theta) * np.pi / n_theta, n_q)
    return QuadratureData(theta, np.tile(q, n_theta)), np.tile(pr, n_theta)


def test_back_projection_of_exact_vacuum_marginals():
    # the band-limited reconstruction of the vacuum at the origin is
    # (1/2pi) int_{-kc}^{kc} |xi| exp(-xi^2/4) d xi / 2 = (1 - exp(-kc^2/4)) / pi
    data, w = exact_vacuum_data()
    grid = GridSpec.square(1.0, 3)
    for kc in (2.0, 4.0, 6.0):
        vals = backproject(data.theta, data.q, w, grid, kc)
        assert vals[1, 1] == pytest.approx((1 - np.exp(-kc**2 / 4)) / np.pi, abs=1e-9)


def test_back_projection_recovers_vacuum_with_large_cutoff():
    data, w = exact_vacuum_data()
    grid = GridSpec.square(2.0, 9)
    vals = backproject(data.theta, data.q, w, grid, 12.0)
    ref = wigner(DensityMatrix.vacuum(0), grid).values
    assert np.max(np.abs(vals - ref)) < 1e-6


def test_reconstruct_coherent_samples():
    rho = build(StateSpec("coherent", {"alpha": 0.7}, 12))
    d = sample(rho, AcquisitionPlan(20_000, 3))
    cfg = RadonConfig(grid=GridSpec.square(3.0, 13))
    w = reconstruct(d, cfg)
    ref = wigner(rho, cfg.grid).values
    assert np.max(np.abs(w.values - ref)) < 0.03
    assert w.riemann_sum() == pytest.approx(1.0, abs=0.05)


def test_binned_matches_direct():
    rho = build(StateSpec("fock", {"n": 1}, 3))
    d = sample(rho, AcquisitionPlan(20_000, 4))
    grid = GridSpec.square(3.0, 13)
    direct = reconstruct(d, RadonConfig(grid=grid))
    binned = reconstruct(d, RadonConfig(grid=grid, binning="binned", n_phase_bins=128, n_q_bins=512))
    assert np.max(np.abs(direct.values - binned.values)) < 5e-3


def test_reconstruct_guards():
    with pytest.raises(DomainError):
        reconstruct(QuadratureData([], []))
    with pytest.raises(DomainError):
        RadonConfig(binning="fancy")
    with pytest.raises(DomainError):
        RadonConfig(k_c=-1.0)
    small = QuadratureData(np.linspace(0, np.pi, 50), np.zeros(50))
    with pytest.warns(UserWarning):
        reconstruct(small, RadonConfig(grid=GridSpec.square(1, 3)))


def test_weights_scale_invariance():
    data, w = exact_vacuum_data(16, 201)
    grid = GridSpec.square(1.0, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = reconstruct(data, RadonConfig(grid=grid), weights=w).values
        b = reconstruct(data, RadonConfig(grid=grid), weights=3.0 * w).values
    assert np.allclose(a, b)


def test_concatenated_data_is_count_weighted_mean():
    grid = GridSpec.square(2.0, 7)
    a = sample(DensityMatrix.vacuum(3), AcquisitionPlan(1500, 1))
    b = sample(build(StateSpec("fock", {"n": 1}, 3)), AcquisitionPlan(3000, 2))
    both = QuadratureData(np.concatenate([a.theta, b.theta]), np.concatenate([a.q, b.q]))
    cfg = RadonConfig(grid=grid)
    expected = (1500 * reconstruct(a, cfg).values + 3000 * reconstruct(b, cfg).values) / 4500
    assert np.allclose(reconstruct(both, cfg).values, expected, atol=1e-12)


def test_quarter_turn_rotates_the_grid():
    d = sample(build(StateSpec("coherent", {"alpha": 0.6 + 0.3j}, 10)), AcquisitionPlan(2000, 3))
    turned = QuadratureData(d.theta + np.pi / 2, d.q)
    cfg = RadonConfig(grid=GridSpec.square(2.0, 9))
    w = reconstruct(d, cfg).values
    # W'(q, p) = W(p, -q)
    assert np.allclose(reconstruct(turned, cfg).values, w.T[::-1], atol=1e-10)


@pytest.mark.slow
def test_coherent_peak_location():
    cfg = RadonConfig(grid=GridSpec.square(4.0, 81))
    w = reconstruct(sample(build(StateSpec("coherent", {"alpha": 1.0}, 15)), AcquisitionPlan(100_000, 4)), cfg)
    q, p = w.argmax()
    cell = cfg.grid.dq
    assert abs(q - np.sqrt(2)) <= cell and abs(p) <= cell


@pytest.mark.slow
def test_measured_photon_is_negative_at_origin():
    from cvtomo.states import rho_meas

    cfg = RadonConfig(grid=GridSpec.square(1.0, 3))
    w = reconstruct(sample(rho_meas(0.62), AcquisitionPlan(100_000, 5)), cfg)
    assert w.at(0.0, 0.0) < 0
