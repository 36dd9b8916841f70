"""Pattern-function (quantum state sampling) estimators.

The density-matrix element ``rho_mn`` is the data average of
``exp(i (m - n) theta) M_mn(q)``, where the pattern function
``M_mn = d/dx [psi_m(x) phi_n(x)]`` (n >= m) is built from the regular
oscillator eigenfunctions ``psi`` and the irregular solutions ``phi``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import dawsn

from .errors import DomainError
from .fock import (
    N_CAP,
    DensityMatrix,
    QuadratureData,
    as_data,
    fock_wavefunction_derivatives,
    fock_wavefunctions,
)

#: Largest |x| for which the irregular functions are evaluated.
X_STABLE = 12.0
TABLE_POINTS = 4096

_PI_QUARTER = np.pi**0.25


def _check_args(n: int, x: np.ndarray) -> None:
    if n < 0 or n > N_CAP:
        raise DomainError(f"order {n} outside [0, {N_CAP}]")
    if np.any(np.abs(x) > X_STABLE) or not np.all(np.isfinite(x)):
        raise DomainError(f"irregular wavefunctions are only supported for |x| <= {X_STABLE}")


def irregular_wavefunctions(n_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """``phi_0 .. phi_{n_max}`` and their derivatives at ``x``.

    ``phi_0 = pi^(3/4) exp(-x^2/2) erfi(x)`` is evaluated as
    ``2 pi^(1/4) exp(x^2/2) D(x)`` with Dawson's function ``D``; higher
    orders follow ``phi_{n+1} = (x phi_n - phi_n') / sqrt(2n+2)`` with the
    derivative taken analytically.
    """
    x = np.asarray(x, dtype=float)
    _check_args(n_max, x)
    grow = 2.0 * _PI_QUARTER * np.exp(0.5 * x * x)
    phi = np.empty((n_max + 1,) + x.shape)
    dphi = np.empty_like(phi)
    phi[0] = grow * dawsn(x)
    dphi[0] = -x * phi[0] + grow
    for n in range(n_max):
        phi[n + 1] = (x * phi[n] - dphi[n]) / np.sqrt(2.0 * n + 2.0)
        # for n >= 1 the lowering relation gives phi_n' = -x phi_n + sqrt(2n) phi_{n-1}
        dphi[n + 1] = -x * phi[n + 1] + np.sqrt(2.0 * (n + 1)) * phi[n]
    return phi, dphi


def irregular_wavefunction(n: int, x):
    val = irregular_wavefunctions(n, x)[0][n]
    return float(val) if np.ndim(val) == 0 else val


def pattern_functions(n_max: int, x) -> np.ndarray:
    """All ``M_mn(x)`` for ``m, n <= n_max``; shape ``(d, d) + x.shape``, symmetric in m, n."""
    x = np.asarray(x, dtype=float)
    psi = fock_wavefunctions(n_max, x)
    dpsi = fock_wavefunction_derivatives(n_max, x, psi)
    phi, dphi = irregular_wavefunctions(n_max, x)
    d = n_max + 1
    out = np.empty((d, d) + x.shape)
    for m in range(d):
        for n in range(m, d):
            out[m, n] = dpsi[m] * phi[n] + psi[m] * dphi[n]
            out[n, m] = out[m, n]
    return out


def pattern_function(m: int, n: int, x):
    lo, hi = min(m, n), max(m, n)
    val = pattern_functions(hi, x)[lo, hi]
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True, eq=False)
class PatternTable:
    """Pattern functions tabulated on a uniform grid, linearly interpolated."""

    n_max: int
    x: np.ndarray
    values: np.ndarray  # (d, d, len(x))

    def __call__(self, q) -> np.ndarray:
        """Interpolated ``M_mn(q)``; shape ``(d, d, len(q))``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if np.any(q < self.x[0]) or np.any(q > self.x[-1]):
            raise DomainError(f"samples outside the tabulated range [{self.x[0]:.3g}, {self.x[-1]:.3g}]")
        h = self.x[1] - self.x[0]
        f = (q - self.x[0]) / h
        i0 = np.clip(np.floor(f).astype(int), 0, self.x.size - 2)
        a = f - i0
        return (1.0 - a) * self.values[:, :, i0] + a * self.values[:, :, i0 + 1]


@lru_cache(maxsize=16)
def pattern_table(n_max: int, half_width: float = X_STABLE, n_points: int = TABLE_POINTS) -> PatternTable:
    x = np.linspace(-half_width, half_width, n_points)
    vals = pattern_functions(n_max, x)
    vals.setflags(write=False)
    x.setflags(write=False)
    return PatternTable(n_max, x, vals)


def _table_for(data: QuadratureData, n_max: int) -> PatternTable:
    reach = float(np.max(np.abs(data.q)))
    if reach > X_STABLE:
        raise DomainError(f"sample |q|={reach:.3g} exceeds the stable range {X_STABLE}")
    # narrowest of a few fixed widths that covers the data; keeps the cache small
    for width in (6.0, 8.0, 10.0, X_STABLE):
        if reach <= width:
            return pattern_table(n_max, width)
    return pattern_table(n_max, X_STABLE)


def _phase_coverage_warning(theta: np.ndarray) -> None:
    counts, _ = np.histogram(theta, bins=8, range=(0.0, 2.0 * np.pi))
    if counts.min() < 0.25 * counts.mean():
        warnings.warn("phases are not uniformly spread; off-diagonal estimates will be biased", stacklevel=3)


@dataclass(frozen=True, eq=False)
class Estimate:
    """Sampled density matrix (not forced positive) with element-wise standard errors."""

    rho: DensityMatrix
    se: np.ndarray
    n_samples: int


def _chunked_mean(data: QuadratureData, table: PatternTable, n_max: int):
    d = n_max + 1
    idx = np.arange(d)
    dm = idx[:, None] - idx[None, :]
    s1 = np.zeros((d, d), dtype=complex)
    s2 = np.zeros((d, d))
    step = 20000
    for s in range(0, len(data), step):
        th = data.theta[s : s + step]
        m = table(data.q[s : s + step])
        f = m * np.exp(1j * dm[:, :, None] * th[None, None, :])
        s1 += f.sum(axis=2)
        s2 += (np.abs(f) ** 2).sum(axis=2)
    return s1, s2


def estimate_density_matrix(samples, n_max: int) -> Estimate:
    """Pattern-function estimate of ``rho_mn = <m|rho|n>`` with standard errors.

    Standard errors are ``sqrt(var / N)`` of the complex sampling function.
    Diagonal entries may come out negative; no positivity is imposed.
    """
    data = as_data(samples)
    if len(data) == 0:
        raise DomainError("cannot estimate from an empty sample list")
    _phase_coverage_warning(data.theta)
    table = _table_for(data, n_max)
    n = len(data)
    s1, s2 = _chunked_mean(data, table, n_max)
    mean = s1 / n
    var = np.clip(s2 / n - np.abs(mean) ** 2, 0.0, None)
    se = np.sqrt(var / max(n - 1, 1))
    rho = DensityMatrix(0.5 * (mean + mean.conj().T))
    return Estimate(rho, se, n)


def photon_number_stats(samples, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Photon-number probabilities ``pr(j) = <M_jj(q)>`` and their standard errors.

    Depends only on the quadrature values, so unrecorded or random phases are fine.
    """
    data = as_data(samples)
    if len(data) == 0:
        raise DomainError("cannot estimate from an empty sample list")
    table = _table_for(data, n_max)
    d = n_max + 1
    s1 = np.zeros(d)
    s2 = np.zeros(d)
    step = 50000
    diag = np.arange(d)
    for s in range(0, len(data), step):
        m = table(data.q[s : s + step])[diag, diag]
        s1 += m.sum(axis=1)
        s2 += (m * m).sum(axis=1)
    n = len(data)
    mean = s1 / n
    se = np.sqrt(np.clip(s2 / n - mean**2, 0.0, None) / max(n - 1, 1))
    return mean, se
